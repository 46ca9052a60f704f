#include "catfit/transform.hpp"

#include <algorithm>
#include <cmath>

#include "catfit/rng.hpp"

namespace catfit {

PairDesign build_pair_design(const FeatureMatrix& features,
                             const SimilarityRatings& ratings) {
  ratings.validate_against(features);
  PairDesign design;
  design.pair_ids.reserve(ratings.pairs.size());
  for (const auto& p : ratings.pairs) {
    auto key = p.id_a <= p.id_b ? std::make_pair(p.id_a, p.id_b)
                                : std::make_pair(p.id_b, p.id_a);
    design.pair_ids.push_back(key);
  }
  std::sort(design.pair_ids.begin(), design.pair_ids.end());

  design.rows.resize(static_cast<Index>(design.pair_ids.size()),
                     features.n_features());
  design.targets.resize(static_cast<Index>(design.pair_ids.size()));
  for (std::size_t i = 0; i < design.pair_ids.size(); ++i) {
    const auto& [a, b] = design.pair_ids[i];
    Index ra = features.row_of(a);
    Index rb = features.row_of(b);
    design.rows.row(static_cast<Index>(i)) =
        features.values.row(ra).cwiseProduct(features.values.row(rb));
    design.targets[static_cast<Index>(i)] = ratings.lookup(a, b);
  }
  return design;
}

/*----------------------------------------------------------------------
  Lawson-Hanson non-negative least squares
----------------------------------------------------------------------*/

namespace {

Vector ls_on_support(const Matrix& x, const Vector& y,
                     const std::vector<Index>& support) {
  Matrix xp(x.rows(), static_cast<Index>(support.size()));
  for (std::size_t j = 0; j < support.size(); ++j)
    xp.col(static_cast<Index>(j)) = x.col(support[j]);
  return xp.colPivHouseholderQr().solve(y);
}

}  // namespace

Vector nnls(const Matrix& x, const Vector& y, const NnlsOptions& opts) {
  if (x.rows() != y.size()) throw ValidationError("nnls: shape mismatch");
  const Index n = x.cols();
  const int max_iter =
      opts.max_outer_iter > 0 ? opts.max_outer_iter : static_cast<int>(10 * n + 100);

  Vector w = Vector::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);
  Vector dual = x.transpose() * y;
  const double tol = opts.kkt_tol * std::max(1.0, dual.cwiseAbs().maxCoeff());

  int outer = 0;
  while (true) {
    dual = x.transpose() * (y - x * w);
    Index best = -1;
    double best_val = tol;
    for (Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && dual[j] > best_val) {
        best_val = dual[j];
        best = j;
      }
    }
    if (best < 0) break;  // KKT satisfied
    if (++outer > max_iter) {
      double residual = (y - x * w).norm();
      throw std::runtime_error(
          "nnls failed to converge after " + std::to_string(max_iter) +
          " iterations (residual " + format_double(residual) + ")");
    }
    passive[static_cast<std::size_t>(best)] = true;

    while (true) {
      std::vector<Index> support;
      for (Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)]) support.push_back(j);
      }
      Vector z = ls_on_support(x, y, support);
      bool feasible = true;
      for (Index j = 0; j < z.size(); ++j) {
        if (z[j] <= 0.0) {
          feasible = false;
          break;
        }
      }
      if (feasible) {
        w.setZero();
        for (std::size_t j = 0; j < support.size(); ++j)
          w[support[j]] = z[static_cast<Index>(j)];
        break;
      }
      // Step toward z until the first passive coordinate hits zero.
      double alpha = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < support.size(); ++j) {
        double zj = z[static_cast<Index>(j)];
        if (zj <= 0.0) {
          double wj = w[support[j]];
          double step = wj / (wj - zj);
          alpha = std::min(alpha, step);
        }
      }
      for (std::size_t j = 0; j < support.size(); ++j) {
        double zj = z[static_cast<Index>(j)];
        double wj = w[support[j]];
        w[support[j]] = wj + alpha * (zj - wj);
      }
      for (std::size_t j = 0; j < support.size(); ++j) {
        if (w[support[j]] <= 1e-14 * std::max(1.0, w.cwiseAbs().maxCoeff())) {
          w[support[j]] = 0.0;
          passive[static_cast<std::size_t>(support[j])] = false;
        }
      }
    }
  }
  return w;
}

Vector nnls_ridge(const PairDesign& design, double lambda,
                  const NnlsOptions& opts) {
  if (lambda < 0.0) throw ValidationError("lambda must be non-negative");
  if (lambda == 0.0) return nnls(design.rows, design.targets, opts);
  const Index m = design.rows.rows();
  const Index n = design.rows.cols();
  Matrix aug(m + n, n);
  aug.topRows(m) = design.rows;
  aug.bottomRows(n) = std::sqrt(lambda) * Matrix::Identity(n, n);
  Vector target = Vector::Zero(m + n);
  target.head(m) = design.targets;
  return nnls(aug, target, opts);
}

/*----------------------------------------------------------------------
  Cross-validated ridge selection over pairs
----------------------------------------------------------------------*/

namespace {

PairDesign subset_design(const PairDesign& full, const std::vector<Index>& rows) {
  PairDesign out;
  out.rows.resize(static_cast<Index>(rows.size()), full.rows.cols());
  out.targets.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.rows.row(static_cast<Index>(i)) = full.rows.row(rows[i]);
    out.targets[static_cast<Index>(i)] = full.targets[rows[i]];
    out.pair_ids.push_back(full.pair_ids[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

// Coefficient of determination on held-out pairs (can go negative).
double r_squared(const Matrix& x, const Vector& y, const Vector& w) {
  Vector pred = x * w;
  double mean = y.mean();
  double ss_tot = (y.array() - mean).square().sum();
  double ss_res = (y - pred).squaredNorm();
  if (ss_tot == 0.0) return 0.0;
  return 1.0 - ss_res / ss_tot;
}

}  // namespace

SimilarityWeights fit_similarity_weights(const FeatureMatrix& features,
                                         const SimilarityRatings& ratings,
                                         const std::vector<double>& lambda_grid,
                                         int n_folds, std::uint64_t seed) {
  if (lambda_grid.empty()) throw ValidationError("lambda grid is empty");
  PairDesign design = build_pair_design(features, ratings);
  const Index n_pairs = design.rows.rows();
  if (n_pairs < n_folds)
    throw ValidationError("fewer rated pairs than folds");

  // Folds partition pairs, not stimuli: the regression rows are the
  // exchangeable unit here.
  std::vector<Index> order(static_cast<std::size_t>(n_pairs));
  for (Index i = 0; i < n_pairs; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed, "lambda-folds");
  rng.shuffle(order);
  std::vector<std::vector<Index>> fold_rows(static_cast<std::size_t>(n_folds));
  for (std::size_t i = 0; i < order.size(); ++i)
    fold_rows[i % static_cast<std::size_t>(n_folds)].push_back(order[i]);

  double best_score = -std::numeric_limits<double>::infinity();
  double best_lambda = lambda_grid.front();
  for (double lambda : lambda_grid) {
    double acc = 0.0;
    for (int f = 0; f < n_folds; ++f) {
      std::vector<Index> train_rows;
      for (int g = 0; g < n_folds; ++g) {
        if (g == f) continue;
        const auto& rows = fold_rows[static_cast<std::size_t>(g)];
        train_rows.insert(train_rows.end(), rows.begin(), rows.end());
      }
      std::sort(train_rows.begin(), train_rows.end());
      PairDesign train = subset_design(design, train_rows);
      Vector w = nnls_ridge(train, lambda);
      PairDesign val = subset_design(design, fold_rows[static_cast<std::size_t>(f)]);
      acc += r_squared(val.rows, val.targets, w);
    }
    double score = acc / static_cast<double>(n_folds);
    if (score > best_score ||
        (score == best_score && lambda < best_lambda)) {
      best_score = score;
      best_lambda = lambda;
    }
  }

  SimilarityWeights out;
  out.lambda = best_lambda;
  out.cv_score = best_score;
  out.w = nnls_ridge(design, best_lambda);  // retrain on the whole dataset
  return out;
}

FeatureMatrix apply_transform(const FeatureMatrix& features, const Vector& w) {
  if (w.size() != features.n_features())
    throw ValidationError("weight length does not match feature count");
  if ((w.array() < 0.0).any())
    throw ValidationError("negative similarity weight");
  FeatureMatrix out;
  out.ids = features.ids;
  out.labels = features.labels;
  out.values =
      (features.values.array().rowwise() * w.transpose().array().sqrt()).matrix();
  out.rebuild_index();
  return out;
}

double similarity_fit_quality(const FeatureMatrix& features,
                              const SimilarityRatings& ratings, const Vector& w,
                              Warnings* warnings) {
  PairDesign design = build_pair_design(features, ratings);
  if (w.size() != design.rows.cols())
    throw ValidationError("weight length does not match feature count");
  Vector pred = design.rows * w;
  double mp = pred.mean();
  double mt = design.targets.mean();
  double spp = (pred.array() - mp).square().sum();
  double stt = (design.targets.array() - mt).square().sum();
  if (spp == 0.0 || stt == 0.0) {
    warn(warnings, "zero variance in predictions or ratings; r^2 reported as 0");
    return 0.0;
  }
  double spt = ((pred.array() - mp) * (design.targets.array() - mt)).sum();
  double r = spt / std::sqrt(spp * stt);
  return r * r;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  for (int e = -2; e <= 6; ++e) grid.push_back(std::pow(10.0, e));
  return grid;
}

}  // namespace catfit
