#ifndef CATFIT_KERNELS_HPP
#define CATFIT_KERNELS_HPP

#include "catfit/data.hpp"

namespace catfit {

// Positive per-dimension scaling that sums to one, materialized from free
// logits so both constraints hold by construction.
struct AttentionWeights {
  Vector w;

  static AttentionWeights uniform(Index n);
  static AttentionWeights from_logits(const Vector& logits);
  void validate() const;
};

// Diagonal covariance structure for the prototype models. Every variant
// uses a diagonal or scalar matrix; full covariance at these
// dimensionalities is ill-posed with a few thousand stimuli.
enum class CovarianceKind {
  Identity,
  SharedDiagonalEmpirical,
  SharedVectorFitted,
  PerCategoryPooledScalarEmpirical,
  PerCategoryDiagonalEmpirical,
  PerCategoryScalarFitted,
  PerCategoryVectorFitted,
};

struct CovarianceSpec {
  CovarianceKind kind = CovarianceKind::Identity;
  Vector sigma_a;  // strictly positive diagonals
  Vector sigma_b;
  void validate() const;
};

// (y - mu)^T diag(sigma)^-1 (y - mu)
double mahalanobis_sq(const Vector& y, const Vector& mu, const Vector& sigma_diag);

// [sum_k w_k |x_k - y_k|^r]^(1/r); r = 2 throughout this toolkit.
double weighted_minkowski(const Vector& y, const Vector& x,
                          const AttentionWeights& w, double r = 2.0);

// exp(-beta * dist^q). Exemplar terms use (beta, q=2) on the Minkowski
// distance; the prototype path calls with beta=1, q=1 since the
// Mahalanobis measure is already squared. Summations over exemplars are
// done in log space elsewhere; this scalar form saturates to 0 for large
// arguments, which is fine standalone.
double exp_similarity(double dist_measure, double beta = 1.0, double q = 2.0);

struct CategoryStats {
  Vector mu;
  Vector var_diag;       // sample variance (n-1), floored
  double pooled = 0.0;   // mean of var_diag entries
};

// Floor added to every empirical variance entry so dead (constant) units
// cannot produce a zero diagonal: eps = 1e-8 * mean feature variance over
// the given rows, with an absolute backstop when even that is zero.
double variance_floor(const FeatureMatrix& features);
double variance_floor(const Matrix& values, const IndexList& rows);

CategoryStats empirical_category_stats(const FeatureMatrix& features, Category c);
CategoryStats empirical_category_stats(const FeatureMatrix& features, Category c,
                                       const IndexList& subset);

// Column mean / floored sample variance over an explicit row set.
Vector mean_of_rows(const Matrix& values, const IndexList& rows);
Vector variance_of_rows(const Matrix& values, const IndexList& rows, double floor_eps);

}  // namespace catfit

#endif  // CATFIT_KERNELS_HPP
