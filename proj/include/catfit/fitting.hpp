#ifndef CATFIT_FITTING_HPP
#define CATFIT_FITTING_HPP

#include <limits>
#include <optional>

#include "catfit/models.hpp"
#include "catfit/rng.hpp"

namespace catfit {

struct FitConfig {
  int n_folds = 5;
  int batch_size = 256;
  int eval_every = 10;    // batches between validation checkpoints
  int max_steps = 5000;   // total batches per fold
  std::vector<double> lr_grid = {1e-3, 3e-3, 1e-2, 3e-2};
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  int n_splits = 100;     // half-splits for the correlation protocol
  int n_threads = 0;      // 0 = hardware concurrency

  void validate() const;
};

struct AdamState {
  Vector m;
  Vector v;
  long t = 0;

  static AdamState zeros(Index n) { return {Vector::Zero(n), Vector::Zero(n), 0}; }
};

// Standard bias-corrected update; deterministic, minimizes.
void adam_step(Vector& params, const Vector& grad, AdamState& state, double alpha,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct FoldSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
};

// Deterministic label-stratified folds; validation sets partition the ids
// and global fold sizes differ by at most one.
std::vector<FoldSplit> make_folds(const std::vector<std::string>& ids,
                                  const std::vector<Category>& labels,
                                  int n_folds, std::uint64_t seed);
std::vector<FoldSplit> make_folds(const std::vector<std::string>& ids, int n_folds,
                                  std::uint64_t seed);

struct Checkpoint {
  int step = 0;
  double val_nll = 0.0;
  Vector theta;
};

struct FoldTrajectory {
  std::vector<Checkpoint> checkpoints;
  bool diverged = false;
  int diverged_at = -1;
};

// One fold at one learning rate: statistics frozen from the training rows,
// mini-batches are shuffled stimulus subsets carrying their full counts,
// each batch gradient scaled by n_train / batch_rows to estimate the
// full-train gradient, validation NLL recorded every eval_every batches.
FoldTrajectory fit_fold(const ModelSpec& spec, const FeatureMatrix& features,
                        const AlignedCounts& counts, const IndexList& train_rows,
                        const IndexList& val_rows, const FitConfig& config,
                        double learning_rate, Rng rng,
                        const std::optional<ParamVector>& init = std::nullopt);

struct RateResult {
  double learning_rate = 0.0;
  std::vector<FoldTrajectory> folds;
  std::vector<double> mean_val_nll;  // across folds, per checkpoint
  int early_stop_index = -1;         // argmin of mean_val_nll
  double best_mean_val_nll = std::numeric_limits<double>::infinity();
};

struct FitResult {
  ModelSpec spec;
  std::vector<int> checkpoint_steps;
  std::vector<RateResult> rates;
  int chosen_rate_index = -1;
  double chosen_learning_rate = 0.0;
  int early_stop_index = -1;
  int early_stop_step = 0;
  ParamVector averaged_params;   // fold mean at the early-stopping point
  double final_ll = 0.0;         // on all judged stimuli, full-data statistics
  double final_aic = 0.0;
  double final_correlation = 0.0;
  Warnings notes;

  nlohmann::json params_json() const;
  nlohmann::json trajectories_json() const;
  nlohmann::json score_json(const std::string& extra_note = "") const;
};

// Full protocol: per learning rate run all folds, early-stop at the
// checkpoint minimizing the fold-mean validation NLL, keep the rate whose
// minimum is lowest, average fold parameters there, then score on the
// whole dataset (LL, AIC, split-half correlation).
FitResult fit_model(const ModelSpec& spec, const FeatureMatrix& features,
                    const JudgmentSet& judgments, const FitConfig& config);

}  // namespace catfit

#endif  // CATFIT_FITTING_HPP
