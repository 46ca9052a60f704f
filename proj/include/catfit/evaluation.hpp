#ifndef CATFIT_EVALUATION_HPP
#define CATFIT_EVALUATION_HPP

#include <unordered_map>

#include "catfit/data.hpp"

#include "json.hpp"

namespace catfit {

// AIC = 2k - 2 ln(L-hat); max_log_likelihood is the (negative) maximized LL.
double aic(int k, double max_log_likelihood);

// Spearman-Brown correction for doubled test length.
double spearman_brown(double r);

struct Reliability {
  double raw_r = 0.0;        // mean split-half Pearson r over splits
  double corrected_r = 0.0;  // Spearman-Brown corrected
  int n_splits = 0;
};

// Per split, each stimulus's trials are randomly divided into halves (odd
// counts put the extra trial on a random side); the two halves' choice
// proportions are correlated across stimuli. Requires >= 2 trials per
// stimulus. Per-split RNG streams derive from (seed, split), so parallel
// and serial evaluation orders agree.
Reliability split_half_reliability(const JudgmentSet& judgments, int n_splits,
                                   std::uint64_t seed,
                                   Warnings* warnings = nullptr);

// Correlates model predictions (p of choosing B per stimulus) against each
// half's proportions, averages the two, then averages over splits. A split
// with zero variance on either side contributes 0 with a warning.
double prediction_correlation(
    const std::unordered_map<std::string, double>& predictions_p_b,
    const JudgmentSet& judgments, int n_splits, std::uint64_t seed,
    Warnings* warnings = nullptr);

struct ModelScore {
  std::string name;
  std::string group;  // report section
  double ll = 0.0;
  double aic = 0.0;
  double correlation = 0.0;
  int k = 0;
};

// External classifier probabilities per stimulus, renormalized to sum to
// one on load.
struct BaselinePredictions {
  struct Entry {
    std::string id;
    double p_a = 0.0;
    double p_b = 0.0;
  };
  std::vector<Entry> entries;

  double p_b_of(const std::string& id) const;
  bool has(const std::string& id) const;
  void rebuild_index();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

BaselinePredictions load_baseline(const std::string& path);

// Counts likelihood under the baseline probabilities; k = 1. Exact 0/1
// probabilities facing opposing counts are clamped to [1e-6, 1 - 1e-6]
// with a warning.
ModelScore score_baseline(const BaselinePredictions& baseline,
                          const JudgmentSet& judgments, int n_splits,
                          std::uint64_t seed, Warnings* warnings = nullptr);

struct CompareReport {
  struct Row {
    ModelScore score;
    bool best_in_class = false;
  };
  struct Group {
    std::string name;
    std::vector<Row> rows;
  };
  std::vector<Group> groups;
  bool has_ceiling = false;
  double ceiling_corrected_r = 0.0;

  std::string render_text() const;
  nlohmann::json to_json() const;
};

// Rows are grouped by score.group and ordered best-first within a group:
// higher LL, then lower AIC, then lexicographic name.
CompareReport compare_models(const std::vector<ModelScore>& scores,
                             const Reliability* ceiling = nullptr);

}  // namespace catfit

#endif  // CATFIT_EVALUATION_HPP
