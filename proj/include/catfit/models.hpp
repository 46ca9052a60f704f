#ifndef CATFIT_MODELS_HPP
#define CATFIT_MODELS_HPP

#include <memory>
#include <optional>
#include <string>

#include "catfit/kernels.hpp"

#include "json.hpp"

namespace catfit {

enum class ModelVariant {
  Identity,
  CommonVariance,
  CommonVectorVariance,
  HyperplaneNoBias,
  HyperplaneBias,
  CategoryPooledVariance,
  CategoryVariance,
  CategoryScalarVariance,
  CategoryVectorVariance,
  ExemplarNoAttention,
  ExemplarAttention,
};

enum class ModelFamily { PrototypeLinear, PrototypeQuadratic, Hyperplane, Exemplar };

struct ModelSpec {
  ModelVariant variant = ModelVariant::Identity;
  Index n_features = 0;

  ModelFamily family() const;
  int n_params() const;
  const char* name() const;
  // Hyperplanes sit with the linear prototypes in comparison reports; the
  // boundary they fit is the same shape.
  const char* report_group() const;
};

const std::vector<ModelVariant>& all_variants();
std::optional<ModelVariant> variant_from_name(const std::string& name);
std::string valid_variant_names();

// Free parameters in the unconstrained space the optimizer works in.
// Positivity and simplex constraints are enforced by materialization
// (exp / normalized exp), so any real theta is admissible.
//
// theta layout per variant (fixed, serialization-stable):
//   identity / common-variance /
//   category-pooled-variance / category-variance:  [gamma_log]
//   common-vector-variance:    [gamma_log, log_c x n_features]
//   hyperplane-nobias:         [gamma_log, v x n_features]
//   hyperplane-bias:           [gamma_log, v x n_features, bias]
//   category-scalar-variance:  [gamma_log, log_p, log_b]
//   category-vector-variance:  [gamma_log, log_p x n_features, log_b x n_features]
//   exemplar-noattention:      [gamma_log, beta_log]
//   exemplar-attention:        [gamma_log, beta_log, attention logits x n_features]
struct ParamVector {
  ModelVariant variant = ModelVariant::Identity;
  Index n_features = 0;
  Vector theta;

  Index size() const { return theta.size(); }

  double gamma_log() const { return theta[0]; }
  double gamma() const { return std::exp(theta[0]); }
  double beta_log() const;
  double beta() const { return std::exp(beta_log()); }

  // Block views (copies; blocks are small relative to the data).
  Vector fitted_log_variance() const;          // common-vector-variance
  Vector fitted_log_variance_a() const;        // category vector/scalar (scalar -> size 1)
  Vector fitted_log_variance_b() const;
  Vector hyperplane_v() const;
  double hyperplane_bias() const;
  Vector attention_logits() const;
  AttentionWeights attention() const;

  // Shifts attention logits so the first one is zero. The softmax is
  // invariant to the shift, so this only fixes the stored gauge.
  void canonicalize();

  nlohmann::json to_json() const;
  static ParamVector from_json(const nlohmann::json& j);
};

// Summary statistics frozen from the training rows. Immutable; shared
// across learning-rate runs of the same fold.
struct FrozenStats {
  Index n_features = 0;
  Vector mu_a, mu_b;          // prototypes (empty when the variant has none)
  Vector shared_var;          // pooled-sample per-dim variance, floored
  Vector var_a, var_b;        // per-category per-dim variance, floored
  double pooled_a = 0.0, pooled_b = 0.0;
  Matrix ex_a, ex_b;          // exemplar rows per category
  Matrix ex_a_sq, ex_b_sq;    // cached elementwise squares
};

std::shared_ptr<const FrozenStats> freeze_stats(const ModelSpec& spec,
                                                const FeatureMatrix& features,
                                                const IndexList& training_rows);

struct ModelState {
  ModelSpec spec;
  std::shared_ptr<const FrozenStats> stats;
  ParamVector params;
};

ModelState make_state(const ModelSpec& spec, const FeatureMatrix& features,
                      const IndexList& training_rows);

// Initialization: gamma_log = 0, beta_log = 0, attention logits = 0,
// v = 0, bias = 0, fitted log-variances at the empirical shared variance.
ParamVector init_params(const ModelSpec& spec, const FrozenStats& stats);

// Materialized diagonal covariance for the prototype families.
CovarianceSpec covariance_for(const ModelState& state);

// L(y) = gamma * log(S(y, t_B) / S(y, t_A)); p(choose B) = sigmoid(L).
double decision_logit(const ModelState& state, const Vector& y);
Vector decision_logits(const ModelState& state, const FeatureMatrix& features,
                       const IndexList& rows);

// p(choose A) = S_A^gamma / (S_A^gamma + S_B^gamma).
double choice_probability(double s_a, double s_b, double gamma);

// Counts-weighted negative log-likelihood over the given rows.
double negative_log_likelihood(const ModelState& state,
                               const FeatureMatrix& features,
                               const AlignedCounts& counts,
                               const IndexList& rows);

struct NllGrad {
  double nll = 0.0;
  Vector grad;  // d NLL / d theta
};

NllGrad nll_gradient(const ModelState& state, const FeatureMatrix& features,
                     const AlignedCounts& counts, const IndexList& rows);

// (v, d) such that 2 y^T v + d == md_A(y) - md_B(y) under identity
// covariance: v = mu_B - mu_A, d = |mu_A|^2 - |mu_B|^2.
std::pair<Vector, double> hyperplane_from_prototypes(const Vector& mu_a,
                                                     const Vector& mu_b);

// Per-stimulus p(choose B) for the given rows.
Vector predict_p_b(const ModelState& state, const FeatureMatrix& features,
                   const IndexList& rows);

}  // namespace catfit

#endif  // CATFIT_MODELS_HPP
