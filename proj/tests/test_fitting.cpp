#include "doctest.h"

#include <cmath>
#include <set>

#include "catfit/fitting.hpp"
#include "catfit/simulate.hpp"
#include "test_util.hpp"

using namespace catfit;

TEST_SUITE_BEGIN("fitting");

TEST_CASE("make_folds partitions stimuli") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("s" + std::to_string(i));

  SUBCASE("10 ids over 5 folds") {
    auto folds = make_folds(ids, 5, 99);
    REQUIRE(folds.size() == 5);
    std::set<std::string> seen;
    for (const auto& f : folds) {
      CHECK(f.val_ids.size() == 2);
      CHECK(f.train_ids.size() == 8);
      for (const auto& id : f.val_ids) CHECK(seen.insert(id).second);
    }
    CHECK(seen.size() == 10);
  }
  SUBCASE("deterministic under the same seed") {
    auto a = make_folds(ids, 5, 7);
    auto b = make_folds(ids, 5, 7);
    for (std::size_t f = 0; f < a.size(); ++f) {
      CHECK(a[f].val_ids == b[f].val_ids);
      CHECK(a[f].train_ids == b[f].train_ids);
    }
  }
  SUBCASE("9 ids over 5 folds leaves one short fold") {
    std::vector<std::string> nine(ids.begin(), ids.begin() + 9);
    auto folds = make_folds(nine, 5, 1);
    std::vector<std::size_t> sizes;
    for (const auto& f : folds) sizes.push_back(f.val_ids.size());
    CHECK(sizes == std::vector<std::size_t>{2, 2, 2, 2, 1});
  }
  SUBCASE("more folds than stimuli is an error") {
    std::vector<std::string> three(ids.begin(), ids.begin() + 3);
    CHECK_THROWS_AS(make_folds(three, 5, 1), ValidationError);
  }
  SUBCASE("stratified folds keep both categories in every training set") {
    auto fm = testutil::random_features(11, 2, 5);
    auto folds = make_folds(fm.ids, fm.labels, 5, 3);
    for (const auto& f : folds) {
      int train_a = 0, train_b = 0;
      for (const auto& id : f.train_ids) {
        (fm.labels[static_cast<std::size_t>(fm.row_of(id))] == Category::A
             ? train_a
             : train_b)++;
      }
      CHECK(train_a >= 2);
      CHECK(train_b >= 2);
    }
    // global balance still holds under stratification
    std::vector<std::size_t> sizes;
    for (const auto& f : folds) sizes.push_back(f.val_ids.size());
    std::size_t lo = *std::min_element(sizes.begin(), sizes.end());
    std::size_t hi = *std::max_element(sizes.begin(), sizes.end());
    CHECK(hi - lo <= 1);
  }
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Vector params(3);
    params << 1, 2, 3;
    Vector before = params;
    AdamState st = AdamState::zeros(3);
    adam_step(params, Vector::Zero(3), st, 0.1);
    CHECK((params - before).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("first step moves by ~alpha in the gradient sign direction") {
    Vector params = Vector::Zero(3);
    Vector grad(3);
    grad << 4.0, -0.02, 1e3;
    AdamState st = AdamState::zeros(3);
    adam_step(params, grad, st, 0.05);
    for (int j = 0; j < 3; ++j) {
      CHECK(params[j] == doctest::Approx(-0.05 * (grad[j] > 0 ? 1 : -1))
                             .epsilon(1e-6));
    }
  }
  SUBCASE("identical inputs give identical outputs") {
    Vector p1 = Vector::Ones(2), p2 = Vector::Ones(2);
    Vector grad(2);
    grad << 0.3, -0.7;
    AdamState s1 = AdamState::zeros(2), s2 = AdamState::zeros(2);
    for (int t = 0; t < 5; ++t) {
      adam_step(p1, grad, s1, 0.01);
      adam_step(p2, grad, s2, 0.01);
    }
    CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("batch gradient estimates average to the full-train gradient") {
  auto fm = testutil::random_features(23, 3, 50);
  auto js = testutil::random_judgments(fm, 8, 51);
  auto counts = align_judgments(fm, js);
  auto state = make_state({ModelVariant::CategoryVectorVariance, 3}, fm,
                          counts.judged_rows);

  IndexList train = counts.judged_rows;
  Rng rng(52, "batch-test");
  rng.shuffle(train);
  const double n = static_cast<double>(train.size());
  Vector weighted_mean = Vector::Zero(state.params.size());
  const std::size_t batch_size = 5;  // 23 rows: the last batch is short
  for (std::size_t start = 0; start < train.size(); start += batch_size) {
    std::size_t take = std::min(batch_size, train.size() - start);
    IndexList batch(train.begin() + static_cast<std::ptrdiff_t>(start),
                    train.begin() + static_cast<std::ptrdiff_t>(start + take));
    Vector scaled =
        nll_gradient(state, fm, counts, batch).grad * (n / static_cast<double>(take));
    weighted_mean += (static_cast<double>(take) / n) * scaled;
  }
  Vector full = nll_gradient(state, fm, counts, train).grad;
  double scale = std::max(1.0, full.cwiseAbs().maxCoeff());
  CHECK((weighted_mean - full).cwiseAbs().maxCoeff() <= 1e-10 * scale);
}

TEST_CASE("fit_fold") {
  auto fm = testutil::random_features(30, 3, 60);
  auto js = testutil::random_judgments(fm, 10, 61);
  auto counts = align_judgments(fm, js);
  IndexList train(counts.judged_rows.begin(), counts.judged_rows.begin() + 24);
  IndexList val(counts.judged_rows.begin() + 24, counts.judged_rows.end());
  FitConfig cfg;
  cfg.eval_every = 5;
  ModelSpec spec{ModelVariant::Identity, 3};

  SUBCASE("max_steps = 0 records only the initial checkpoint") {
    cfg.max_steps = 0;
    auto traj = fit_fold(spec, fm, counts, train, val, cfg, 0.01, Rng(1, "t"));
    REQUIRE(traj.checkpoints.size() == 1);
    CHECK(traj.checkpoints[0].step == 0);
  }
  SUBCASE("near-zero gamma init scores the random-responding NLL") {
    cfg.max_steps = 0;
    auto stats = freeze_stats(spec, fm, train);
    ParamVector init = init_params(spec, *stats);
    init.theta[0] = -1e6;
    auto traj =
        fit_fold(spec, fm, counts, train, val, cfg, 0.01, Rng(1, "t"), init);
    double n_val = 0.0;
    for (Index r : val) n_val += counts.n_a[r] + counts.n_b[r];
    CHECK(traj.checkpoints[0].val_nll ==
          doctest::Approx(n_val * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("checkpoint grid is aligned and complete") {
    cfg.max_steps = 23;
    auto traj = fit_fold(spec, fm, counts, train, val, cfg, 0.01, Rng(1, "t"));
    std::vector<int> steps;
    for (const auto& ck : traj.checkpoints) steps.push_back(ck.step);
    CHECK(steps == std::vector<int>{0, 5, 10, 15, 20, 23});
  }
}

TEST_CASE("fit_fold recovers the generating gamma at the best checkpoint") {
  GeneratorSpec gen;
  gen.model = ModelVariant::Identity;
  gen.gamma = 2.0;
  gen.n_stimuli = 200;
  gen.n_features = 4;
  gen.trials_per_stimulus = 100;
  gen.separation = 1.0;
  auto data = simulate_dataset(gen, 77);
  auto counts = align_judgments(data.features, data.judgments);

  IndexList train, val;
  for (Index r : counts.judged_rows) (r % 5 == 0 ? val : train).push_back(r);
  FitConfig cfg;
  cfg.batch_size = 64;
  cfg.eval_every = 10;
  cfg.max_steps = 400;
  ModelSpec spec{ModelVariant::Identity, 4};
  auto traj =
      fit_fold(spec, data.features, counts, train, val, cfg, 0.02, Rng(5, "r"));
  const Checkpoint* best = &traj.checkpoints[0];
  for (const auto& ck : traj.checkpoints) {
    if (ck.val_nll < best->val_nll) best = &ck;
  }
  double gamma = std::exp(best->theta[0]);
  CHECK(gamma == doctest::Approx(2.0).epsilon(0.10));
}

TEST_CASE("fit_model") {
  GeneratorSpec gen;
  gen.model = ModelVariant::Identity;
  gen.gamma = 1.5;
  gen.n_stimuli = 60;
  gen.n_features = 3;
  gen.trials_per_stimulus = 40;
  gen.separation = 1.0;
  auto data = simulate_dataset(gen, 80);

  FitConfig cfg;
  cfg.batch_size = 32;
  cfg.eval_every = 10;
  cfg.max_steps = 150;
  cfg.n_splits = 20;
  cfg.seed = 4;
  ModelSpec spec{ModelVariant::Identity, 3};

  SUBCASE("a one-point grid is chosen outright") {
    cfg.lr_grid = {0.02};
    auto result = fit_model(spec, data.features, data.judgments, cfg);
    CHECK(result.chosen_learning_rate == 0.02);
    CHECK(std::isfinite(result.final_ll));
  }
  SUBCASE("the early stop index minimizes the fold-mean validation NLL") {
    cfg.lr_grid = {0.005, 0.05};
    auto result = fit_model(spec, data.features, data.judgments, cfg);
    const auto& chosen =
        result.rates[static_cast<std::size_t>(result.chosen_rate_index)];
    double at_stop =
        chosen.mean_val_nll[static_cast<std::size_t>(result.early_stop_index)];
    for (double v : chosen.mean_val_nll) CHECK(at_stop <= v);
    // averaged params are the fold mean at that checkpoint
    Vector mean = Vector::Zero(spec.n_params());
    for (const auto& fold : chosen.folds)
      mean += fold.checkpoints[static_cast<std::size_t>(result.early_stop_index)]
                  .theta;
    mean /= static_cast<double>(chosen.folds.size());
    CHECK((result.averaged_params.theta - mean).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("a diverging learning rate loses to the survivor") {
    cfg.lr_grid = {0.02, 1e12};
    auto result = fit_model(spec, data.features, data.judgments, cfg);
    CHECK(result.chosen_learning_rate == 0.02);
    bool noted = false;
    for (const auto& n : result.notes) {
      if (n.find("diverged") != std::string::npos) noted = true;
    }
    CHECK(noted);
  }
  SUBCASE("deterministic end to end") {
    cfg.lr_grid = {0.005, 0.02};
    auto r1 = fit_model(spec, data.features, data.judgments, cfg);
    auto r2 = fit_model(spec, data.features, data.judgments, cfg);
    CHECK(r1.final_ll == r2.final_ll);
    CHECK(r1.final_correlation == r2.final_correlation);
    CHECK((r1.averaged_params.theta - r2.averaged_params.theta)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(r1.trajectories_json() == r2.trajectories_json());
  }
  SUBCASE("final LL beats random responding on recoverable data") {
    cfg.lr_grid = {0.02};
    auto result = fit_model(spec, data.features, data.judgments, cfg);
    double n_trials = static_cast<double>(data.judgments.total_trials());
    CHECK(result.final_ll > -n_trials * std::log(2.0));
  }
}

TEST_CASE("config validation") {
  FitConfig cfg;
  cfg.n_folds = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = FitConfig{};
  cfg.lr_grid.clear();
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = FitConfig{};
  cfg.lr_grid = {0.0};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_SUITE_END();
