#include "catfit/models.hpp"

#include <cmath>

namespace catfit {

namespace {

struct VariantInfo {
  ModelVariant variant;
  const char* name;
  ModelFamily family;
};

constexpr VariantInfo kVariants[] = {
    {ModelVariant::Identity, "identity", ModelFamily::PrototypeLinear},
    {ModelVariant::CommonVariance, "common-variance", ModelFamily::PrototypeLinear},
    {ModelVariant::CommonVectorVariance, "common-vector-variance",
     ModelFamily::PrototypeLinear},
    {ModelVariant::HyperplaneNoBias, "hyperplane-nobias", ModelFamily::Hyperplane},
    {ModelVariant::HyperplaneBias, "hyperplane-bias", ModelFamily::Hyperplane},
    {ModelVariant::CategoryPooledVariance, "category-pooled-variance",
     ModelFamily::PrototypeQuadratic},
    {ModelVariant::CategoryVariance, "category-variance",
     ModelFamily::PrototypeQuadratic},
    {ModelVariant::CategoryScalarVariance, "category-scalar-variance",
     ModelFamily::PrototypeQuadratic},
    {ModelVariant::CategoryVectorVariance, "category-vector-variance",
     ModelFamily::PrototypeQuadratic},
    {ModelVariant::ExemplarNoAttention, "exemplar-noattention",
     ModelFamily::Exemplar},
    {ModelVariant::ExemplarAttention, "exemplar-attention", ModelFamily::Exemplar},
};

const VariantInfo& info_for(ModelVariant v) {
  for (const auto& vi : kVariants) {
    if (vi.variant == v) return vi;
  }
  throw ValidationError("unknown model variant");
}

Matrix gather_rows(const Matrix& values, const IndexList& rows) {
  Matrix out(static_cast<Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = values.row(rows[i]);
  return out;
}

Vector gather(const Vector& v, const IndexList& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[static_cast<Index>(i)] = v[rows[i]];
  return out;
}

// Squared deviations from a prototype, scaled by an inverse diagonal.
Vector mahalanobis_rows(const Matrix& y, const Vector& mu, const Vector& sigma) {
  return ((y.rowwise() - mu.transpose()).array().square().rowwise() /
          sigma.transpose().array())
      .rowwise()
      .sum();
}

struct ExemplarForward {
  Matrix d_a, d_b;        // weighted squared distances, rows = stimuli
  Matrix alpha_a, alpha_b;  // softmax responsibilities over exemplars
  Vector lse_a, lse_b;    // log S_C
};

Matrix weighted_sq_dists(const Matrix& y, const Matrix& x, const Vector& w) {
  Vector rw = w.array().sqrt();
  Matrix ys = y.array().rowwise() * rw.transpose().array();
  Matrix xs = x.array().rowwise() * rw.transpose().array();
  Vector yn = ys.rowwise().squaredNorm();
  Vector xn = xs.rowwise().squaredNorm();
  Matrix d = (-2.0 * ys * xs.transpose());
  d.colwise() += yn;
  d.rowwise() += xn.transpose();
  return d.cwiseMax(0.0);
}

void lse_and_alpha(const Matrix& d, double beta, Vector* lse, Matrix* alpha) {
  Matrix a = -beta * d;
  Vector row_max = a.rowwise().maxCoeff();
  Matrix e = (a.colwise() - row_max).array().exp();
  Vector sums = e.rowwise().sum();
  *lse = row_max.array() + sums.array().log();
  *alpha = e.array().colwise() / sums.array();
}

ExemplarForward exemplar_forward(const ModelState& state, const Matrix& y) {
  const FrozenStats& st = *state.stats;
  if (st.ex_a.rows() == 0 || st.ex_b.rows() == 0)
    throw ValidationError("empty exemplar set for a category");
  Vector w = state.spec.variant == ModelVariant::ExemplarAttention
                 ? state.params.attention().w
                 : AttentionWeights::uniform(st.n_features).w;
  double beta = state.params.beta();
  ExemplarForward fwd;
  fwd.d_a = weighted_sq_dists(y, st.ex_a, w);
  fwd.d_b = weighted_sq_dists(y, st.ex_b, w);
  lse_and_alpha(fwd.d_a, beta, &fwd.lse_a, &fwd.alpha_a);
  lse_and_alpha(fwd.d_b, beta, &fwd.lse_b, &fwd.alpha_b);
  return fwd;
}

// log(S_B / S_A) per stimulus; the logit is gamma times this.
Vector log_similarity_ratio(const ModelState& state, const Matrix& y) {
  const FrozenStats& st = *state.stats;
  const ParamVector& p = state.params;
  switch (state.spec.variant) {
    case ModelVariant::Identity:
    case ModelVariant::CommonVariance:
    case ModelVariant::CommonVectorVariance:
    case ModelVariant::CategoryPooledVariance:
    case ModelVariant::CategoryVariance:
    case ModelVariant::CategoryScalarVariance:
    case ModelVariant::CategoryVectorVariance: {
      CovarianceSpec cov = covariance_for(state);
      return mahalanobis_rows(y, st.mu_a, cov.sigma_a) -
             mahalanobis_rows(y, st.mu_b, cov.sigma_b);
    }
    case ModelVariant::HyperplaneNoBias:
      return 2.0 * (y * p.hyperplane_v());
    case ModelVariant::HyperplaneBias:
      return (2.0 * (y * p.hyperplane_v())).array() + p.hyperplane_bias();
    case ModelVariant::ExemplarNoAttention:
    case ModelVariant::ExemplarAttention: {
      ExemplarForward fwd = exemplar_forward(state, y);
      return fwd.lse_b - fwd.lse_a;
    }
  }
  throw ValidationError("unknown model variant");
}

Vector logits_for(const ModelState& state, const Matrix& y) {
  if (y.cols() != state.spec.n_features)
    throw ValidationError("feature dimension mismatch");
  return state.params.gamma() * log_similarity_ratio(state, y);
}

void check_judged(const AlignedCounts& counts, const IndexList& rows) {
  if (rows.empty()) throw ValidationError("empty stimulus subset");
  for (Index r : rows) {
    if (counts.n_a[r] + counts.n_b[r] < 1.0)
      throw ValidationError("subset stimulus has no judgments (row " +
                            std::to_string(r) + ")");
  }
}

double nll_from_logits(const Vector& logits, const Vector& na, const Vector& nb) {
  double acc = 0.0;
  for (Index i = 0; i < logits.size(); ++i) {
    acc += nb[i] * softplus(-logits[i]) + na[i] * softplus(logits[i]);
  }
  return acc;
}

}  // namespace

ModelFamily ModelSpec::family() const { return info_for(variant).family; }
const char* ModelSpec::name() const { return info_for(variant).name; }

const char* ModelSpec::report_group() const {
  switch (family()) {
    case ModelFamily::PrototypeLinear:
    case ModelFamily::Hyperplane:
      return "Prototype - Linear";
    case ModelFamily::PrototypeQuadratic:
      return "Prototype - Quadratic";
    case ModelFamily::Exemplar:
      return "Exemplar";
  }
  return "?";
}

int ModelSpec::n_params() const {
  const int d = static_cast<int>(n_features);
  switch (variant) {
    case ModelVariant::Identity:
    case ModelVariant::CommonVariance:
    case ModelVariant::CategoryPooledVariance:
    case ModelVariant::CategoryVariance:
      return 1;
    case ModelVariant::CommonVectorVariance:
    case ModelVariant::HyperplaneNoBias:
      return 1 + d;
    case ModelVariant::HyperplaneBias:
      return 2 + d;
    case ModelVariant::CategoryScalarVariance:
      return 3;
    case ModelVariant::CategoryVectorVariance:
      return 1 + 2 * d;
    case ModelVariant::ExemplarNoAttention:
      return 2;
    case ModelVariant::ExemplarAttention:
      return 2 + d;
  }
  throw ValidationError("unknown model variant");
}

const std::vector<ModelVariant>& all_variants() {
  static const std::vector<ModelVariant> v = [] {
    std::vector<ModelVariant> out;
    for (const auto& vi : kVariants) out.push_back(vi.variant);
    return out;
  }();
  return v;
}

std::optional<ModelVariant> variant_from_name(const std::string& name) {
  for (const auto& vi : kVariants) {
    if (name == vi.name) return vi.variant;
  }
  return std::nullopt;
}

std::string valid_variant_names() {
  std::string out;
  for (const auto& vi : kVariants) {
    if (!out.empty()) out += ", ";
    out += vi.name;
  }
  return out;
}

/*----------------------------------------------------------------------
  ParamVector
----------------------------------------------------------------------*/

double ParamVector::beta_log() const {
  if (variant != ModelVariant::ExemplarNoAttention &&
      variant != ModelVariant::ExemplarAttention)
    throw ValidationError("beta only exists for exemplar models");
  return theta[1];
}

Vector ParamVector::fitted_log_variance() const {
  if (variant != ModelVariant::CommonVectorVariance)
    throw ValidationError("no shared fitted variance block");
  return theta.segment(1, n_features);
}

Vector ParamVector::fitted_log_variance_a() const {
  if (variant == ModelVariant::CategoryScalarVariance) return theta.segment(1, 1);
  if (variant == ModelVariant::CategoryVectorVariance)
    return theta.segment(1, n_features);
  throw ValidationError("no per-category fitted variance block");
}

Vector ParamVector::fitted_log_variance_b() const {
  if (variant == ModelVariant::CategoryScalarVariance) return theta.segment(2, 1);
  if (variant == ModelVariant::CategoryVectorVariance)
    return theta.segment(1 + n_features, n_features);
  throw ValidationError("no per-category fitted variance block");
}

Vector ParamVector::hyperplane_v() const {
  if (variant != ModelVariant::HyperplaneNoBias &&
      variant != ModelVariant::HyperplaneBias)
    throw ValidationError("no hyperplane block");
  return theta.segment(1, n_features);
}

double ParamVector::hyperplane_bias() const {
  if (variant != ModelVariant::HyperplaneBias)
    throw ValidationError("no hyperplane bias");
  return theta[1 + n_features];
}

Vector ParamVector::attention_logits() const {
  if (variant != ModelVariant::ExemplarAttention)
    throw ValidationError("no attention block");
  return theta.segment(2, n_features);
}

AttentionWeights ParamVector::attention() const {
  return AttentionWeights::from_logits(attention_logits());
}

void ParamVector::canonicalize() {
  if (variant == ModelVariant::ExemplarAttention && n_features > 0) {
    double z0 = theta[2];
    theta.segment(2, n_features).array() -= z0;
  }
}

nlohmann::json ParamVector::to_json() const {
  ModelSpec spec{variant, n_features};
  nlohmann::json j;
  j["variant"] = spec.name();
  j["n_features"] = n_features;
  j["gamma_log"] = theta[0];
  auto vec = [](const Vector& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  switch (variant) {
    case ModelVariant::Identity:
    case ModelVariant::CommonVariance:
    case ModelVariant::CategoryPooledVariance:
    case ModelVariant::CategoryVariance:
      break;
    case ModelVariant::CommonVectorVariance:
      j["log_variance"] = vec(fitted_log_variance());
      break;
    case ModelVariant::HyperplaneNoBias:
      j["v"] = vec(hyperplane_v());
      break;
    case ModelVariant::HyperplaneBias:
      j["v"] = vec(hyperplane_v());
      j["bias"] = hyperplane_bias();
      break;
    case ModelVariant::CategoryScalarVariance:
      j["log_variance_a"] = theta[1];
      j["log_variance_b"] = theta[2];
      break;
    case ModelVariant::CategoryVectorVariance:
      j["log_variance_a"] = vec(fitted_log_variance_a());
      j["log_variance_b"] = vec(fitted_log_variance_b());
      break;
    case ModelVariant::ExemplarNoAttention:
      j["beta_log"] = theta[1];
      break;
    case ModelVariant::ExemplarAttention:
      j["beta_log"] = theta[1];
      j["attention_logits"] = vec(attention_logits());
      break;
  }
  return j;
}

ParamVector ParamVector::from_json(const nlohmann::json& j) {
  auto variant = variant_from_name(j.at("variant").get<std::string>());
  if (!variant) throw ValidationError("unknown variant in params JSON");
  ParamVector p;
  p.variant = *variant;
  p.n_features = j.at("n_features").get<Index>();
  ModelSpec spec{p.variant, p.n_features};
  p.theta = Vector::Zero(spec.n_params());
  p.theta[0] = j.at("gamma_log").get<double>();
  auto fill = [&](const char* key, Index offset, Index len) {
    auto arr = j.at(key).get<std::vector<double>>();
    if (static_cast<Index>(arr.size()) != len)
      throw ValidationError(std::string("bad block length for ") + key);
    for (Index i = 0; i < len; ++i) p.theta[offset + i] = arr[static_cast<std::size_t>(i)];
  };
  switch (p.variant) {
    case ModelVariant::Identity:
    case ModelVariant::CommonVariance:
    case ModelVariant::CategoryPooledVariance:
    case ModelVariant::CategoryVariance:
      break;
    case ModelVariant::CommonVectorVariance:
      fill("log_variance", 1, p.n_features);
      break;
    case ModelVariant::HyperplaneNoBias:
      fill("v", 1, p.n_features);
      break;
    case ModelVariant::HyperplaneBias:
      fill("v", 1, p.n_features);
      p.theta[1 + p.n_features] = j.at("bias").get<double>();
      break;
    case ModelVariant::CategoryScalarVariance:
      p.theta[1] = j.at("log_variance_a").get<double>();
      p.theta[2] = j.at("log_variance_b").get<double>();
      break;
    case ModelVariant::CategoryVectorVariance:
      fill("log_variance_a", 1, p.n_features);
      fill("log_variance_b", 1 + p.n_features, p.n_features);
      break;
    case ModelVariant::ExemplarNoAttention:
      p.theta[1] = j.at("beta_log").get<double>();
      break;
    case ModelVariant::ExemplarAttention:
      p.theta[1] = j.at("beta_log").get<double>();
      fill("attention_logits", 2, p.n_features);
      break;
  }
  return p;
}

/*----------------------------------------------------------------------
  Frozen statistics and state assembly
----------------------------------------------------------------------*/

std::shared_ptr<const FrozenStats> freeze_stats(const ModelSpec& spec,
                                                const FeatureMatrix& features,
                                                const IndexList& training_rows) {
  if (training_rows.empty()) throw ValidationError("no training rows");
  auto st = std::make_shared<FrozenStats>();
  st->n_features = features.n_features();

  const ModelFamily fam = spec.family();
  IndexList rows_a = features.rows_of_category(Category::A, training_rows);
  IndexList rows_b = features.rows_of_category(Category::B, training_rows);

  if (fam == ModelFamily::PrototypeLinear || fam == ModelFamily::PrototypeQuadratic) {
    if (rows_a.empty() || rows_b.empty())
      throw ValidationError("training rows must cover both categories");
    st->mu_a = mean_of_rows(features.values, rows_a);
    st->mu_b = mean_of_rows(features.values, rows_b);

    const double floor_eps = variance_floor(features.values, training_rows);
    switch (spec.variant) {
      case ModelVariant::CommonVariance:
      case ModelVariant::CommonVectorVariance:
      case ModelVariant::CategoryScalarVariance:
      case ModelVariant::CategoryVectorVariance:
        st->shared_var = variance_of_rows(features.values, training_rows, floor_eps);
        break;
      case ModelVariant::CategoryPooledVariance:
      case ModelVariant::CategoryVariance:
        st->var_a = variance_of_rows(features.values, rows_a, floor_eps);
        st->var_b = variance_of_rows(features.values, rows_b, floor_eps);
        st->pooled_a = st->var_a.mean();
        st->pooled_b = st->var_b.mean();
        break;
      default:
        break;
    }
  } else if (fam == ModelFamily::Exemplar) {
    if (rows_a.empty() || rows_b.empty())
      throw ValidationError("empty exemplar set for a category");
    st->ex_a = gather_rows(features.values, rows_a);
    st->ex_b = gather_rows(features.values, rows_b);
    st->ex_a_sq = st->ex_a.array().square();
    st->ex_b_sq = st->ex_b.array().square();
  }
  return st;
}

ParamVector init_params(const ModelSpec& spec, const FrozenStats& stats) {
  ParamVector p;
  p.variant = spec.variant;
  p.n_features = spec.n_features;
  p.theta = Vector::Zero(spec.n_params());
  switch (spec.variant) {
    case ModelVariant::CommonVectorVariance:
      p.theta.segment(1, spec.n_features) = stats.shared_var.array().log();
      break;
    case ModelVariant::CategoryScalarVariance:
      p.theta[1] = std::log(stats.shared_var.mean());
      p.theta[2] = p.theta[1];
      break;
    case ModelVariant::CategoryVectorVariance:
      p.theta.segment(1, spec.n_features) = stats.shared_var.array().log();
      p.theta.segment(1 + spec.n_features, spec.n_features) =
          stats.shared_var.array().log();
      break;
    default:
      break;
  }
  return p;
}

ModelState make_state(const ModelSpec& spec, const FeatureMatrix& features,
                      const IndexList& training_rows) {
  if (spec.n_features != features.n_features())
    throw ValidationError("spec/feature dimension mismatch");
  ModelState state;
  state.spec = spec;
  state.stats = freeze_stats(spec, features, training_rows);
  state.params = init_params(spec, *state.stats);
  return state;
}

CovarianceSpec covariance_for(const ModelState& state) {
  const FrozenStats& st = *state.stats;
  const ParamVector& p = state.params;
  const Index d = state.spec.n_features;
  CovarianceSpec cov;
  switch (state.spec.variant) {
    case ModelVariant::Identity:
      cov.kind = CovarianceKind::Identity;
      cov.sigma_a = Vector::Ones(d);
      cov.sigma_b = cov.sigma_a;
      break;
    case ModelVariant::CommonVariance:
      cov.kind = CovarianceKind::SharedDiagonalEmpirical;
      cov.sigma_a = st.shared_var;
      cov.sigma_b = cov.sigma_a;
      break;
    case ModelVariant::CommonVectorVariance:
      cov.kind = CovarianceKind::SharedVectorFitted;
      cov.sigma_a = p.fitted_log_variance().array().exp();
      cov.sigma_b = cov.sigma_a;
      break;
    case ModelVariant::CategoryPooledVariance:
      cov.kind = CovarianceKind::PerCategoryPooledScalarEmpirical;
      cov.sigma_a = Vector::Constant(d, st.pooled_a);
      cov.sigma_b = Vector::Constant(d, st.pooled_b);
      break;
    case ModelVariant::CategoryVariance:
      cov.kind = CovarianceKind::PerCategoryDiagonalEmpirical;
      cov.sigma_a = st.var_a;
      cov.sigma_b = st.var_b;
      break;
    case ModelVariant::CategoryScalarVariance:
      cov.kind = CovarianceKind::PerCategoryScalarFitted;
      cov.sigma_a = Vector::Constant(d, std::exp(p.theta[1]));
      cov.sigma_b = Vector::Constant(d, std::exp(p.theta[2]));
      break;
    case ModelVariant::CategoryVectorVariance:
      cov.kind = CovarianceKind::PerCategoryVectorFitted;
      cov.sigma_a = p.fitted_log_variance_a().array().exp();
      cov.sigma_b = p.fitted_log_variance_b().array().exp();
      break;
    default:
      throw ValidationError("no covariance structure for this family");
  }
  cov.validate();
  return cov;
}

/*----------------------------------------------------------------------
  Evaluation
----------------------------------------------------------------------*/

double decision_logit(const ModelState& state, const Vector& y) {
  Matrix ym(1, y.size());
  ym.row(0) = y.transpose();
  return logits_for(state, ym)[0];
}

Vector decision_logits(const ModelState& state, const FeatureMatrix& features,
                       const IndexList& rows) {
  return logits_for(state, gather_rows(features.values, rows));
}

double choice_probability(double s_a, double s_b, double gamma) {
  if (!(s_a > 0.0) || !(s_b > 0.0))
    throw ValidationError("similarities must be positive");
  return sigmoid(gamma * (std::log(s_a) - std::log(s_b)));
}

double negative_log_likelihood(const ModelState& state,
                               const FeatureMatrix& features,
                               const AlignedCounts& counts,
                               const IndexList& rows) {
  check_judged(counts, rows);
  Vector logits = decision_logits(state, features, rows);
  return nll_from_logits(logits, gather(counts.n_a, rows), gather(counts.n_b, rows));
}

NllGrad nll_gradient(const ModelState& state, const FeatureMatrix& features,
                     const AlignedCounts& counts, const IndexList& rows) {
  check_judged(counts, rows);
  const FrozenStats& st = *state.stats;
  const ParamVector& p = state.params;
  const double gamma = p.gamma();
  const Index d = state.spec.n_features;

  Matrix y = gather_rows(features.values, rows);
  Vector na = gather(counts.n_a, rows);
  Vector nb = gather(counts.n_b, rows);

  NllGrad out;
  out.grad = Vector::Zero(p.size());

  // Forward pass, keeping the intermediates each variant needs.
  Vector ratio;              // log(S_B / S_A)
  Matrix da2, db2;           // squared deviations from each prototype
  Vector sa, sb;             // unscaled squared distances (scalar variants)
  ExemplarForward fwd;
  CovarianceSpec cov;

  switch (state.spec.variant) {
    case ModelVariant::Identity:
    case ModelVariant::CommonVariance:
    case ModelVariant::CommonVectorVariance:
    case ModelVariant::CategoryPooledVariance:
    case ModelVariant::CategoryVariance:
    case ModelVariant::CategoryScalarVariance:
    case ModelVariant::CategoryVectorVariance: {
      cov = covariance_for(state);
      da2 = (y.rowwise() - st.mu_a.transpose()).array().square();
      db2 = (y.rowwise() - st.mu_b.transpose()).array().square();
      Vector md_a = (da2.array().rowwise() / cov.sigma_a.transpose().array())
                        .rowwise()
                        .sum();
      Vector md_b = (db2.array().rowwise() / cov.sigma_b.transpose().array())
                        .rowwise()
                        .sum();
      ratio = md_a - md_b;
      if (state.spec.variant == ModelVariant::CategoryScalarVariance) {
        sa = da2.rowwise().sum();
        sb = db2.rowwise().sum();
      }
      break;
    }
    case ModelVariant::HyperplaneNoBias:
      ratio = 2.0 * (y * p.hyperplane_v());
      break;
    case ModelVariant::HyperplaneBias:
      ratio = (2.0 * (y * p.hyperplane_v())).array() + p.hyperplane_bias();
      break;
    case ModelVariant::ExemplarNoAttention:
    case ModelVariant::ExemplarAttention:
      fwd = exemplar_forward(state, y);
      ratio = fwd.lse_b - fwd.lse_a;
      break;
  }

  Vector logits = gamma * ratio;
  out.nll = nll_from_logits(logits, na, nb);

  // dNLL/dL_i = n_A * sigmoid(L) - n_B * sigmoid(-L)
  Vector g(logits.size());
  for (Index i = 0; i < logits.size(); ++i) {
    g[i] = na[i] * sigmoid(logits[i]) - nb[i] * sigmoid(-logits[i]);
  }

  // d L / d gamma_log = L
  out.grad[0] = g.dot(logits);

  Vector gg = gamma * g;  // chain factor for the remaining blocks
  switch (state.spec.variant) {
    case ModelVariant::Identity:
    case ModelVariant::CommonVariance:
    case ModelVariant::CategoryPooledVariance:
    case ModelVariant::CategoryVariance:
      break;
    case ModelVariant::CommonVectorVariance: {
      // d ratio / d log c_k = -(da2 - db2)_k / c_k
      Vector u = (da2 - db2).transpose() * gg;
      out.grad.segment(1, d) = -(u.array() / cov.sigma_a.array());
      break;
    }
    case ModelVariant::HyperplaneNoBias:
      out.grad.segment(1, d) = 2.0 * (y.transpose() * gg);
      break;
    case ModelVariant::HyperplaneBias:
      out.grad.segment(1, d) = 2.0 * (y.transpose() * gg);
      out.grad[1 + d] = gg.sum();
      break;
    case ModelVariant::CategoryScalarVariance: {
      double pa = cov.sigma_a[0];
      double pb = cov.sigma_b[0];
      out.grad[1] = -gg.dot(sa) / pa;
      out.grad[2] = gg.dot(sb) / pb;
      break;
    }
    case ModelVariant::CategoryVectorVariance: {
      Vector ua = da2.transpose() * gg;
      Vector ub = db2.transpose() * gg;
      out.grad.segment(1, d) = -(ua.array() / cov.sigma_a.array());
      out.grad.segment(1 + d, d) = ub.array() / cov.sigma_b.array();
      break;
    }
    case ModelVariant::ExemplarNoAttention:
    case ModelVariant::ExemplarAttention: {
      const double beta = p.beta();
      // d ratio / d beta_log = beta * (E_A[D] - E_B[D])
      Vector ed_a = (fwd.alpha_a.array() * fwd.d_a.array()).rowwise().sum();
      Vector ed_b = (fwd.alpha_b.array() * fwd.d_b.array()).rowwise().sum();
      out.grad[1] = beta * gg.dot(ed_a - ed_b);
      if (state.spec.variant == ModelVariant::ExemplarAttention) {
        // Expected per-dimension squared deviation under the
        // responsibilities: E[x^2] - 2 y E[x] + y^2.
        Vector w = p.attention().w;
        Matrix ea = fwd.alpha_a * st.ex_a_sq -
                    2.0 * (y.array() * (fwd.alpha_a * st.ex_a).array()).matrix() +
                    y.array().square().matrix();
        Matrix eb = fwd.alpha_b * st.ex_b_sq -
                    2.0 * (y.array() * (fwd.alpha_b * st.ex_b).array()).matrix() +
                    y.array().square().matrix();
        // d ratio / d w_k = beta * (E_A - E_B)_k, then through the softmax.
        Matrix pw = beta * (ea - eb);
        Vector u = pw.transpose() * gg;
        double uw = u.dot(w);
        out.grad.segment(2, d) = (w.array() * u.array()) - uw * w.array();
      }
      break;
    }
  }
  return out;
}

std::pair<Vector, double> hyperplane_from_prototypes(const Vector& mu_a,
                                                     const Vector& mu_b) {
  if (mu_a.size() != mu_b.size())
    throw ValidationError("prototype length mismatch");
  Vector v = mu_b - mu_a;
  double bias = mu_a.squaredNorm() - mu_b.squaredNorm();
  return {v, bias};
}

Vector predict_p_b(const ModelState& state, const FeatureMatrix& features,
                   const IndexList& rows) {
  Vector logits = decision_logits(state, features, rows);
  Vector p(logits.size());
  for (Index i = 0; i < logits.size(); ++i) p[i] = sigmoid(logits[i]);
  return p;
}

}  // namespace catfit
