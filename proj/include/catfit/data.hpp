#ifndef CATFIT_DATA_HPP
#define CATFIT_DATA_HPP

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "catfit/common.hpp"

namespace catfit {

// The task is strictly two-alternative. Arbitrary label strings map onto
// A/B through LabelMap.
enum class Category : int { A = 0, B = 1 };

inline Category other(Category c) {
  return c == Category::A ? Category::B : Category::A;
}

struct LabelMap {
  std::string a = "A";
  std::string b = "B";
};

// Stimuli x dimensions activations with ids and ground-truth labels.
// Immutable after loading; safe to share across threads.
struct FeatureMatrix {
  std::vector<std::string> ids;
  std::vector<Category> labels;
  Matrix values;  // n_stimuli x n_features

  Index n_stimuli() const { return values.rows(); }
  Index n_features() const { return values.cols(); }

  bool has(const std::string& id) const { return index_.count(id) != 0; }
  Index row_of(const std::string& id) const;
  IndexList rows_of_category(Category c) const;
  IndexList rows_of_category(Category c, const IndexList& subset) const;
  IndexList all_rows() const;

  void rebuild_index();  // also validates invariants
 private:
  std::unordered_map<std::string, Index> index_;
};

// Per-stimulus choice counts. Trial-level files are collapsed to counts on
// load; aggregated counts are the canonical compute path.
struct JudgmentSet {
  struct Entry {
    std::string id;
    long n_a = 0;
    long n_b = 0;
  };
  std::vector<Entry> entries;  // file order

  bool has(const std::string& id) const { return index_.count(id) != 0; }
  const Entry& at(const std::string& id) const;
  long total_trials() const;

  void rebuild_index();
  void validate_against(const FeatureMatrix& features) const;

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Judgment counts re-indexed by feature-matrix row for model evaluation.
struct AlignedCounts {
  Vector n_a;               // length n_stimuli, zero where unjudged
  Vector n_b;
  IndexList judged_rows;    // rows with n_a + n_b >= 1
  double total() const { return n_a.sum() + n_b.sum(); }
};

AlignedCounts align_judgments(const FeatureMatrix& features,
                              const JudgmentSet& judgments);

// Mean pairwise similarity ratings over a stimulus subset. Stored per
// unordered pair; lookups are symmetric.
struct SimilarityRatings {
  struct Pair {
    std::string id_a;
    std::string id_b;
    double rating = 0.0;
  };
  std::vector<Pair> pairs;  // deduplicated, file order

  std::size_t n_pairs() const { return pairs.size(); }
  bool has(const std::string& a, const std::string& b) const;
  double lookup(const std::string& a, const std::string& b) const;
  void validate_against(const FeatureMatrix& features) const;

  void rebuild_index();

 private:
  std::unordered_map<std::string, double> index_;  // key "a\x1fb", a<=b
};

enum class JudgmentMode { Trials, Counts };

// CSV ingestion. UTF-8, comma separated, '.' decimal point, header row
// required. Column-count mismatches are fatal.
FeatureMatrix load_features(const std::string& path, const LabelMap& lm = {});
JudgmentSet load_judgments(const std::string& path, JudgmentMode mode,
                           const LabelMap& lm = {});
SimilarityRatings load_similarities(const std::string& path,
                                    Warnings* warnings = nullptr);

// Writers round-trip bit-exactly through the loaders.
void write_features(const std::string& path, const FeatureMatrix& fm,
                    const LabelMap& lm = {});
void write_judgments(const std::string& path, const JudgmentSet& js);

}  // namespace catfit

#endif  // CATFIT_DATA_HPP
