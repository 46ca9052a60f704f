#include "catfit/fitting.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>

#include "catfit/evaluation.hpp"

namespace catfit {

void FitConfig::validate() const {
  if (n_folds < 2) throw ValidationError("n_folds must be >= 2");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (eval_every < 1) throw ValidationError("eval_every must be >= 1");
  if (max_steps < 0) throw ValidationError("max_steps must be >= 0");
  if (lr_grid.empty()) throw ValidationError("learning-rate grid is empty");
  for (double lr : lr_grid) {
    if (!(lr > 0.0)) throw ValidationError("learning rates must be positive");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) ||
      !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ValidationError("adam epsilon must be positive");
  if (n_splits < 1) throw ValidationError("n_splits must be >= 1");
}

void adam_step(Vector& params, const Vector& grad, AdamState& state, double alpha,
               double beta1, double beta2, double eps) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw ValidationError("adam_step: shape mismatch");
  ++state.t;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double m_corr = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double v_corr = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  params.array() -= alpha * (state.m.array() / m_corr) /
                    ((state.v.array() / v_corr).sqrt() + eps);
}

/*----------------------------------------------------------------------
  Folds
----------------------------------------------------------------------*/

std::vector<FoldSplit> make_folds(const std::vector<std::string>& ids,
                                  const std::vector<Category>& labels,
                                  int n_folds, std::uint64_t seed) {
  if (ids.size() != labels.size())
    throw ValidationError("make_folds: ids/labels size mismatch");
  if (n_folds < 2) throw ValidationError("make_folds: need at least 2 folds");
  if (static_cast<std::size_t>(n_folds) > ids.size())
    throw ValidationError("make_folds: more folds than stimuli");

  Rng rng(seed, "folds");
  std::vector<std::size_t> stratum_a, stratum_b;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    (labels[i] == Category::A ? stratum_a : stratum_b).push_back(i);
  }
  rng.shuffle(stratum_a);
  rng.shuffle(stratum_b);

  // Deal both strata round-robin with one running cursor, so folds are
  // balanced within each category and globally differ by at most one.
  std::vector<std::vector<std::size_t>> fold_members(
      static_cast<std::size_t>(n_folds));
  std::size_t cursor = 0;
  for (const auto* stratum : {&stratum_a, &stratum_b}) {
    for (std::size_t idx : *stratum) {
      fold_members[cursor % static_cast<std::size_t>(n_folds)].push_back(idx);
      ++cursor;
    }
  }

  std::vector<FoldSplit> out(static_cast<std::size_t>(n_folds));
  std::vector<int> fold_of(ids.size(), -1);
  for (int f = 0; f < n_folds; ++f) {
    for (std::size_t idx : fold_members[static_cast<std::size_t>(f)])
      fold_of[idx] = f;
  }
  for (int f = 0; f < n_folds; ++f) {
    auto& split = out[static_cast<std::size_t>(f)];
    for (std::size_t i = 0; i < ids.size(); ++i) {
      (fold_of[i] == f ? split.val_ids : split.train_ids).push_back(ids[i]);
    }
  }
  return out;
}

std::vector<FoldSplit> make_folds(const std::vector<std::string>& ids, int n_folds,
                                  std::uint64_t seed) {
  return make_folds(ids, std::vector<Category>(ids.size(), Category::A), n_folds,
                    seed);
}

/*----------------------------------------------------------------------
  Single-fold optimization
----------------------------------------------------------------------*/

namespace {

std::vector<int> checkpoint_steps_for(const FitConfig& config) {
  std::vector<int> steps = {0};
  for (int s = config.eval_every; s <= config.max_steps; s += config.eval_every)
    steps.push_back(s);
  if (steps.back() != config.max_steps) steps.push_back(config.max_steps);
  return steps;
}

}  // namespace

FoldTrajectory fit_fold(const ModelSpec& spec, const FeatureMatrix& features,
                        const AlignedCounts& counts, const IndexList& train_rows,
                        const IndexList& val_rows, const FitConfig& config,
                        double learning_rate, Rng rng,
                        const std::optional<ParamVector>& init) {
  ModelState state;
  state.spec = spec;
  state.stats = freeze_stats(spec, features, train_rows);
  state.params = init ? *init : init_params(spec, *state.stats);
  if (state.params.size() != spec.n_params())
    throw ValidationError("initial parameter vector has wrong length");

  const std::vector<int> steps = checkpoint_steps_for(config);
  const double n_train = static_cast<double>(train_rows.size());

  FoldTrajectory traj;
  traj.checkpoints.reserve(steps.size());
  auto record = [&](int step) {
    double val = negative_log_likelihood(state, features, counts, val_rows);
    if (!std::isfinite(val)) val = std::numeric_limits<double>::infinity();
    traj.checkpoints.push_back({step, val, state.params.theta});
  };
  record(0);

  AdamState adam = AdamState::zeros(state.params.size());
  IndexList order = train_rows;
  std::size_t cursor = order.size();  // forces a shuffle on first use
  std::size_t next_checkpoint = 1;

  for (int step = 1; step <= config.max_steps; ++step) {
    if (cursor >= order.size()) {
      rng.shuffle(order);
      cursor = 0;
    }
    std::size_t take = std::min<std::size_t>(
        static_cast<std::size_t>(config.batch_size), order.size() - cursor);
    IndexList batch(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                    order.begin() + static_cast<std::ptrdiff_t>(cursor + take));
    cursor += take;

    NllGrad ng = nll_gradient(state, features, counts, batch);
    Vector grad = ng.grad * (n_train / static_cast<double>(take));
    adam_step(state.params.theta, grad, adam, learning_rate, config.adam_beta1,
              config.adam_beta2, config.adam_epsilon);

    if (!state.params.theta.allFinite()) {
      traj.diverged = true;
      traj.diverged_at = step;
      // Keep the checkpoint grid aligned across folds.
      while (next_checkpoint < steps.size()) {
        traj.checkpoints.push_back({steps[next_checkpoint],
                                    std::numeric_limits<double>::infinity(),
                                    state.params.theta});
        ++next_checkpoint;
      }
      break;
    }
    if (next_checkpoint < steps.size() && step == steps[next_checkpoint]) {
      record(step);
      ++next_checkpoint;
    }
  }
  return traj;
}

/*----------------------------------------------------------------------
  Grid search across learning rates and folds
----------------------------------------------------------------------*/

namespace {

void run_parallel(std::size_t n_tasks, int n_threads,
                  const std::function<void(std::size_t)>& fn) {
  unsigned hw = std::thread::hardware_concurrency();
  std::size_t workers = n_threads > 0 ? static_cast<std::size_t>(n_threads)
                                      : (hw > 0 ? hw : 1);
  workers = std::min(workers, n_tasks);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n_tasks) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

FitResult fit_model(const ModelSpec& spec, const FeatureMatrix& features,
                    const JudgmentSet& judgments, const FitConfig& config) {
  config.validate();
  AlignedCounts counts = align_judgments(features, judgments);
  if (counts.judged_rows.empty()) throw ValidationError("no judged stimuli");

  // Folds partition the judged stimulus set, stratified by ground truth.
  std::vector<std::string> judged_ids;
  std::vector<Category> judged_labels;
  for (Index r : counts.judged_rows) {
    judged_ids.push_back(features.ids[static_cast<std::size_t>(r)]);
    judged_labels.push_back(features.labels[static_cast<std::size_t>(r)]);
  }
  auto folds = make_folds(judged_ids, judged_labels, config.n_folds, config.seed);

  auto rows_for = [&](const std::vector<std::string>& ids) {
    IndexList rows;
    rows.reserve(ids.size());
    for (const auto& id : ids) rows.push_back(features.row_of(id));
    return rows;
  };

  FitResult result;
  result.spec = spec;
  result.checkpoint_steps = checkpoint_steps_for(config);
  result.rates.resize(config.lr_grid.size());
  for (std::size_t li = 0; li < config.lr_grid.size(); ++li) {
    result.rates[li].learning_rate = config.lr_grid[li];
    result.rates[li].folds.resize(folds.size());
  }

  const std::size_t n_tasks = config.lr_grid.size() * folds.size();
  run_parallel(n_tasks, config.n_threads, [&](std::size_t task) {
    std::size_t li = task / folds.size();
    std::size_t fi = task % folds.size();
    Rng stream(config.seed, "batches", li, fi);
    result.rates[li].folds[fi] =
        fit_fold(spec, features, counts, rows_for(folds[fi].train_ids),
                 rows_for(folds[fi].val_ids), config, config.lr_grid[li], stream);
  });

  // Early stopping: the checkpoint minimizing the fold-mean validation NLL.
  const std::size_t n_ckpt = result.checkpoint_steps.size();
  for (auto& rate : result.rates) {
    rate.mean_val_nll.assign(n_ckpt, 0.0);
    for (std::size_t c = 0; c < n_ckpt; ++c) {
      double acc = 0.0;
      for (const auto& fold : rate.folds) acc += fold.checkpoints[c].val_nll;
      rate.mean_val_nll[c] = acc / static_cast<double>(rate.folds.size());
    }
    for (std::size_t c = 0; c < n_ckpt; ++c) {
      if (rate.mean_val_nll[c] < rate.best_mean_val_nll) {
        rate.best_mean_val_nll = rate.mean_val_nll[c];
        rate.early_stop_index = static_cast<int>(c);
      }
    }
    for (const auto& fold : rate.folds) {
      if (fold.diverged) {
        result.notes.push_back("learning rate " +
                               format_double(rate.learning_rate) +
                               " diverged at step " +
                               std::to_string(fold.diverged_at));
        break;
      }
    }
  }

  for (std::size_t li = 0; li < result.rates.size(); ++li) {
    const auto& rate = result.rates[li];
    if (rate.early_stop_index < 0) continue;
    if (result.chosen_rate_index < 0 ||
        rate.best_mean_val_nll <
            result.rates[static_cast<std::size_t>(result.chosen_rate_index)]
                .best_mean_val_nll) {
      result.chosen_rate_index = static_cast<int>(li);
    }
  }
  if (result.chosen_rate_index < 0) {
    std::string diag = "all learning rates diverged for model " +
                       std::string(spec.name()) + "; grid:";
    for (double lr : config.lr_grid) diag += " " + format_double(lr);
    throw std::runtime_error(diag);
  }

  const auto& chosen = result.rates[static_cast<std::size_t>(result.chosen_rate_index)];
  result.chosen_learning_rate = chosen.learning_rate;
  result.early_stop_index = chosen.early_stop_index;
  result.early_stop_step =
      result.checkpoint_steps[static_cast<std::size_t>(chosen.early_stop_index)];

  // Cross-fold average in the unconstrained space, then fix the stored
  // attention gauge (the softmax is shift-invariant, so averaging commutes).
  Vector mean_theta = Vector::Zero(spec.n_params());
  for (const auto& fold : chosen.folds)
    mean_theta +=
        fold.checkpoints[static_cast<std::size_t>(chosen.early_stop_index)].theta;
  mean_theta /= static_cast<double>(chosen.folds.size());
  result.averaged_params.variant = spec.variant;
  result.averaged_params.n_features = spec.n_features;
  result.averaged_params.theta = mean_theta;
  result.averaged_params.canonicalize();

  // Final scores use predictions for the whole judged set, with summary
  // statistics recomputed from it.
  ModelState final_state;
  final_state.spec = spec;
  final_state.stats = freeze_stats(spec, features, counts.judged_rows);
  final_state.params = result.averaged_params;
  result.final_ll =
      -negative_log_likelihood(final_state, features, counts, counts.judged_rows);
  result.final_aic = aic(spec.n_params(), result.final_ll);

  Vector p_b = predict_p_b(final_state, features, counts.judged_rows);
  std::unordered_map<std::string, double> predictions;
  for (std::size_t i = 0; i < counts.judged_rows.size(); ++i)
    predictions[features.ids[static_cast<std::size_t>(counts.judged_rows[i])]] =
        p_b[static_cast<Index>(i)];
  result.final_correlation = prediction_correlation(
      predictions, judgments, config.n_splits, config.seed, &result.notes);
  return result;
}

/*----------------------------------------------------------------------
  Serialization
----------------------------------------------------------------------*/

namespace {

nlohmann::json json_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

nlohmann::json FitResult::params_json() const {
  nlohmann::json j = averaged_params.to_json();
  j["model"] = spec.name();
  j["n_params"] = spec.n_params();
  return j;
}

nlohmann::json FitResult::trajectories_json() const {
  nlohmann::json j;
  j["model"] = spec.name();
  j["checkpoint_steps"] = checkpoint_steps;
  j["chosen_learning_rate"] = chosen_learning_rate;
  j["early_stop_step"] = early_stop_step;
  nlohmann::json rates_j = nlohmann::json::array();
  for (const auto& rate : rates) {
    nlohmann::json rj;
    rj["learning_rate"] = rate.learning_rate;
    rj["early_stop_index"] = rate.early_stop_index;
    rj["best_mean_val_nll"] = json_or_null(rate.best_mean_val_nll);
    nlohmann::json mean_j = nlohmann::json::array();
    for (double v : rate.mean_val_nll) mean_j.push_back(json_or_null(v));
    rj["mean_val_nll"] = mean_j;
    nlohmann::json folds_j = nlohmann::json::array();
    for (const auto& fold : rate.folds) {
      nlohmann::json fj = nlohmann::json::array();
      for (const auto& ck : fold.checkpoints) fj.push_back(json_or_null(ck.val_nll));
      folds_j.push_back(fj);
    }
    rj["fold_val_nll"] = folds_j;
    rates_j.push_back(rj);
  }
  j["rates"] = rates_j;
  j["notes"] = notes;
  return j;
}

nlohmann::json FitResult::score_json(const std::string& extra_note) const {
  nlohmann::json j;
  j["model"] = spec.name();
  j["k"] = spec.n_params();
  j["ll"] = final_ll;
  j["aic"] = final_aic;
  j["correlation"] = final_correlation;
  j["chosen_learning_rate"] = chosen_learning_rate;
  j["early_stop_step"] = early_stop_step;
  if (!extra_note.empty()) j["note"] = extra_note;
  return j;
}

}  // namespace catfit
