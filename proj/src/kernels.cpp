#include "catfit/kernels.hpp"

#include <cmath>

namespace catfit {

AttentionWeights AttentionWeights::uniform(Index n) {
  AttentionWeights aw;
  aw.w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  return aw;
}

AttentionWeights AttentionWeights::from_logits(const Vector& logits) {
  AttentionWeights aw;
  double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  aw.w = e / e.sum();
  return aw;
}

void AttentionWeights::validate() const {
  if (w.size() == 0) throw ValidationError("empty attention weights");
  if ((w.array() <= 0.0).any())
    throw ValidationError("attention weights must be strictly positive");
  if (std::abs(w.sum() - 1.0) > 1e-9)
    throw ValidationError("attention weights must sum to one");
}

void CovarianceSpec::validate() const {
  if ((sigma_a.array() <= 0.0).any() || (sigma_b.array() <= 0.0).any())
    throw ValidationError("nonpositive variance entry");
}

double mahalanobis_sq(const Vector& y, const Vector& mu, const Vector& sigma_diag) {
  if (y.size() != mu.size() || y.size() != sigma_diag.size())
    throw ValidationError("mahalanobis_sq: length mismatch");
  if ((sigma_diag.array() <= 0.0).any())
    throw ValidationError("mahalanobis_sq: nonpositive variance entry");
  return ((y - mu).array().square() / sigma_diag.array()).sum();
}

double weighted_minkowski(const Vector& y, const Vector& x,
                          const AttentionWeights& w, double r) {
  if (y.size() != x.size() || y.size() != w.w.size())
    throw ValidationError("weighted_minkowski: length mismatch");
  double acc = (w.w.array() * (x - y).array().abs().pow(r)).sum();
  return std::pow(acc, 1.0 / r);
}

double exp_similarity(double dist_measure, double beta, double q) {
  return std::exp(-beta * std::pow(dist_measure, q));
}

double variance_floor(const Matrix& values, const IndexList& rows) {
  if (rows.size() < 2) return 1e-12;
  Vector mu = mean_of_rows(values, rows);
  Vector acc = Vector::Zero(values.cols());
  for (Index r : rows)
    acc += (values.row(r).transpose() - mu).array().square().matrix();
  double mean_var = acc.mean() / static_cast<double>(rows.size() - 1);
  double eps = 1e-8 * mean_var;
  return eps > 0.0 ? eps : 1e-12;
}

double variance_floor(const FeatureMatrix& features) {
  return variance_floor(features.values, features.all_rows());
}

Vector mean_of_rows(const Matrix& values, const IndexList& rows) {
  if (rows.empty()) throw ValidationError("mean over empty row set");
  Vector mu = Vector::Zero(values.cols());
  for (Index r : rows) mu += values.row(r).transpose();
  return mu / static_cast<double>(rows.size());
}

Vector variance_of_rows(const Matrix& values, const IndexList& rows,
                        double floor_eps) {
  if (rows.size() < 2)
    throw ValidationError("variance needs at least 2 members");
  Vector mu = mean_of_rows(values, rows);
  Vector acc = Vector::Zero(values.cols());
  for (Index r : rows)
    acc += (values.row(r).transpose() - mu).array().square().matrix();
  Vector var = acc / static_cast<double>(rows.size() - 1);
  return (var.array() + floor_eps).matrix();
}

CategoryStats empirical_category_stats(const FeatureMatrix& features, Category c,
                                       const IndexList& subset) {
  IndexList members = features.rows_of_category(c, subset);
  if (members.size() < 2)
    throw ValidationError("category needs at least 2 members for statistics");
  CategoryStats st;
  st.mu = mean_of_rows(features.values, members);
  st.var_diag = variance_of_rows(features.values, members,
                                 variance_floor(features.values, subset));
  st.pooled = st.var_diag.mean();
  return st;
}

CategoryStats empirical_category_stats(const FeatureMatrix& features, Category c) {
  return empirical_category_stats(features, c, features.all_rows());
}

}  // namespace catfit
