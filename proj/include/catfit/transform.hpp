#ifndef CATFIT_TRANSFORM_HPP
#define CATFIT_TRANSFORM_HPP

#include "catfit/data.hpp"

namespace catfit {

// Regression design for fitting per-dimension similarity weights: one row
// per rated pair, row(i,j) = f_i o f_j (elementwise product), target s_ij,
// so predictions are sum_k w_k f_ik f_jk.
struct PairDesign {
  Matrix rows;
  Vector targets;
  std::vector<std::pair<std::string, std::string>> pair_ids;  // sorted
};

PairDesign build_pair_design(const FeatureMatrix& features,
                             const SimilarityRatings& ratings);

struct NnlsOptions {
  double kkt_tol = 1e-10;  // relative to max(1, |X^T y|_inf)
  int max_outer_iter = 0;  // 0 = 10 * n_cols + 100
};

// min ||X w - y||^2 subject to w >= 0, Lawson-Hanson active set.
Vector nnls(const Matrix& x, const Vector& y, const NnlsOptions& opts = {});

// Ridge term applied exactly as row augmentation: X stacked over
// sqrt(lambda) * I with zero targets, then plain NNLS.
Vector nnls_ridge(const PairDesign& design, double lambda,
                  const NnlsOptions& opts = {});

struct SimilarityWeights {
  Vector w;               // >= 0, always
  double lambda = 0.0;    // chosen ridge parameter
  double cv_score = 0.0;  // mean held-out R^2 at the chosen lambda
};

// Grid search over lambda with n_folds cross-validation over pairs, pick
// the best mean held-out R^2 (ties to the smaller lambda), refit on all
// pairs.
SimilarityWeights fit_similarity_weights(const FeatureMatrix& features,
                                         const SimilarityRatings& ratings,
                                         const std::vector<double>& lambda_grid,
                                         int n_folds, std::uint64_t seed);

// Column k scaled by sqrt(w_k), so inner products of transformed rows
// reproduce sum_k w_k f_ik f_jk exactly.
FeatureMatrix apply_transform(const FeatureMatrix& features, const Vector& w);

// Squared Pearson correlation between weighted inner products and ratings
// over all rated pairs. Returns 0 with a warning when either side has zero
// variance.
double similarity_fit_quality(const FeatureMatrix& features,
                              const SimilarityRatings& ratings, const Vector& w,
                              Warnings* warnings = nullptr);

std::vector<double> default_lambda_grid();

}  // namespace catfit

#endif  // CATFIT_TRANSFORM_HPP
