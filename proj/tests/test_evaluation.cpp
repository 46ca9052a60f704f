#include "doctest.h"

#include <cmath>

#include "catfit/evaluation.hpp"
#include "catfit/rng.hpp"
#include "test_util.hpp"

using namespace catfit;

namespace {

JudgmentSet unanimous_judgments(int n, int trials) {
  JudgmentSet js;
  for (int i = 0; i < n; ++i) {
    bool is_b = i % 2 == 1;
    js.entries.push_back({"u" + std::to_string(i), is_b ? 0L : trials,
                          is_b ? trials : 0L});
  }
  js.rebuild_index();
  return js;
}

}  // namespace

TEST_SUITE_BEGIN("evaluation");

TEST_CASE("aic is exact") {
  CHECK(aic(1, -168152.0) == 336306.0);
  CHECK(aic(0, 0.0) == 0.0);
  CHECK(aic(2, -10.0) == 24.0);
  CHECK_THROWS_AS(aic(-1, 0.0), ValidationError);
}

TEST_CASE("spearman_brown") {
  CHECK(spearman_brown(1.0 / 3.0) == 0.5);
  CHECK(spearman_brown(1.0) == 1.0);
  SUBCASE("monotone increasing on (-1, 1]") {
    double prev = -std::numeric_limits<double>::infinity();
    for (double r = -0.9; r <= 1.0; r += 0.05) {
      double c = spearman_brown(r);
      CHECK(c > prev);
      prev = c;
    }
  }
}

TEST_CASE("split_half_reliability") {
  SUBCASE("unanimous judgments are perfectly reliable") {
    auto js = unanimous_judgments(20, 9);  // odd trial counts too
    auto rel = split_half_reliability(js, 25, 123);
    CHECK(rel.raw_r == 1.0);
    CHECK(rel.corrected_r == 1.0);
  }
  SUBCASE("fair-coin judgments have near-zero reliability") {
    Rng rng(7, "coin");
    JudgmentSet js;
    for (int i = 0; i < 300; ++i) {
      long nb = rng.next_binomial(60, 0.5);
      js.entries.push_back({"c" + std::to_string(i), 60 - nb, nb});
    }
    js.rebuild_index();
    auto rel = split_half_reliability(js, 40, 11);
    CHECK(std::abs(rel.corrected_r) < 0.1);
  }
  SUBCASE("stimulus with fewer than 2 trials is an error") {
    JudgmentSet js;
    js.entries.push_back({"x", 1, 0});
    js.entries.push_back({"y", 3, 3});
    js.rebuild_index();
    CHECK_THROWS_WITH_AS(split_half_reliability(js, 10, 1),
                         doctest::Contains("fewer than 2 trials"),
                         ValidationError);
  }
  SUBCASE("deterministic for a fixed seed") {
    auto fm = testutil::random_features(30, 2, 8);
    auto js = testutil::random_judgments(fm, 21, 9);
    auto r1 = split_half_reliability(js, 30, 5);
    auto r2 = split_half_reliability(js, 30, 5);
    CHECK(r1.raw_r == r2.raw_r);
  }
}

TEST_CASE("prediction_correlation") {
  SUBCASE("self-consistent predictions approach r = 1") {
    Rng rng(12, "selfcons");
    JudgmentSet js;
    std::unordered_map<std::string, double> preds;
    for (int i = 0; i < 150; ++i) {
      double p = 0.05 + 0.9 * rng.next_double();
      long trials = 2000;
      long nb = rng.next_binomial(trials, p);
      std::string id = "p" + std::to_string(i);
      js.entries.push_back({id, trials - nb, nb});
      preds[id] = static_cast<double>(nb) / static_cast<double>(trials);
    }
    js.rebuild_index();
    double r = prediction_correlation(preds, js, 20, 3);
    CHECK(r > 0.99);
  }
  SUBCASE("constant predictions contribute zero with a warning") {
    auto fm = testutil::random_features(20, 2, 13);
    auto js = testutil::random_judgments(fm, 11, 14);
    std::unordered_map<std::string, double> preds;
    for (const auto& id : fm.ids) preds[id] = 0.5;
    Warnings warnings;
    double r = prediction_correlation(preds, js, 10, 4, &warnings);
    CHECK(r == 0.0);
    CHECK(!warnings.empty());
  }
  SUBCASE("missing prediction is an error") {
    JudgmentSet js;
    js.entries.push_back({"x", 2, 2});
    js.rebuild_index();
    std::unordered_map<std::string, double> preds;
    CHECK_THROWS_AS(prediction_correlation(preds, js, 5, 1), ValidationError);
  }
}

TEST_CASE("score_baseline") {
  testutil::TempDir dir("eval_baseline");

  SUBCASE("uniform baseline scores N log 2") {
    auto fm = testutil::random_features(16, 2, 15);
    auto js = testutil::random_judgments(fm, 10, 16);
    std::string csv = "id,p_A,p_B\n";
    for (const auto& id : fm.ids) csv += id + ",0.5,0.5\n";
    auto path = dir.file("b.csv");
    testutil::write_text(path, csv);
    auto baseline = load_baseline(path);
    Warnings warnings;
    auto score = score_baseline(baseline, js, 10, 2, &warnings);
    double n = static_cast<double>(js.total_trials());
    CHECK(score.ll == doctest::Approx(-n * std::log(2.0)).epsilon(1e-12));
    CHECK(score.k == 1);
    CHECK(score.aic == doctest::Approx(2.0 + 2.0 * n * std::log(2.0)));
  }
  SUBCASE("renormalization and hand-computed LL") {
    // p_B renormalizes to 0.8; counts (1 A, 3 B)
    auto path = dir.file("c.csv");
    testutil::write_text(path, "id,p_A,p_B\nx,0.1,0.4\ny,0.5,0.5\n");
    auto baseline = load_baseline(path);
    JudgmentSet js;
    js.entries.push_back({"x", 1, 3});
    js.entries.push_back({"y", 2, 2});
    js.rebuild_index();
    auto score = score_baseline(baseline, js, 5, 2);
    double expected = std::log(0.2) + 3 * std::log(0.8) + 4 * std::log(0.5);
    CHECK(score.ll == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("one-hot baseline against unanimous judgments clamps to ~0 LL") {
    auto js = unanimous_judgments(10, 8);
    std::string csv = "id,p_A,p_B\n";
    for (const auto& e : js.entries)
      csv += e.id + (e.n_b > 0 ? ",0,1\n" : ",1,0\n");
    auto path = dir.file("d.csv");
    testutil::write_text(path, csv);
    auto baseline = load_baseline(path);
    auto score = score_baseline(baseline, js, 5, 2);
    CHECK(score.ll <= 0.0);
    CHECK(score.ll > -0.01);  // clamp effect only
  }
  SUBCASE("opposing counts against exact 0/1 warn") {
    auto path = dir.file("e.csv");
    testutil::write_text(path, "id,p_A,p_B\nx,1,0\ny,0.5,0.5\n");
    auto baseline = load_baseline(path);
    JudgmentSet js;
    js.entries.push_back({"x", 1, 3});
    js.entries.push_back({"y", 1, 1});
    js.rebuild_index();
    Warnings warnings;
    auto score = score_baseline(baseline, js, 5, 2, &warnings);
    CHECK(std::isfinite(score.ll));
    REQUIRE(!warnings.empty());
    CHECK(warnings[0].find("clamped") != std::string::npos);
  }
}

TEST_CASE("compare_models") {
  auto mk = [](const std::string& name, const std::string& group, double ll,
               double aic_v, int k) {
    ModelScore s;
    s.name = name;
    s.group = group;
    s.ll = ll;
    s.aic = aic_v;
    s.correlation = 0.5;
    s.k = k;
    return s;
  };

  SUBCASE("single model gives a single-row table") {
    auto report = compare_models({mk("identity", "Prototype - Linear", -10, 22, 1)});
    REQUIRE(report.groups.size() == 1);
    REQUIRE(report.groups[0].rows.size() == 1);
    CHECK(report.groups[0].rows[0].best_in_class);
  }
  SUBCASE("ties break by AIC then name") {
    auto report = compare_models(
        {mk("bbb", "Exemplar", -10, 24, 2), mk("aaa", "Exemplar", -10, 24, 2),
         mk("ccc", "Exemplar", -10, 22, 1)});
    const auto& rows = report.groups[0].rows;
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].score.name == "ccc");  // same LL, lower AIC
    CHECK(rows[1].score.name == "aaa");  // name order
    CHECK(rows[2].score.name == "bbb");
    CHECK(rows[0].best_in_class);
    CHECK(!rows[1].best_in_class);
  }
  SUBCASE("33 scores group into the three-layer report layout") {
    std::vector<ModelScore> scores;
    const char* groups[] = {"Prototype - Linear", "Prototype - Quadratic",
                            "Exemplar"};
    int counts[] = {5, 4, 2};
    for (int layer = 1; layer <= 3; ++layer) {
      for (int g = 0; g < 3; ++g) {
        for (int m = 0; m < counts[g]; ++m) {
          scores.push_back(mk("m" + std::to_string(g) + std::to_string(m) +
                                  "@L" + std::to_string(layer),
                              groups[g], -100.0 * layer - m, 200.0, 1));
        }
      }
    }
    Reliability ceiling{0.6, 0.75, 100};
    auto report = compare_models(scores, &ceiling);
    REQUIRE(report.groups.size() == 3);
    std::size_t total = 0;
    for (const auto& g : report.groups) total += g.rows.size();
    CHECK(total == 33);
    CHECK(report.has_ceiling);
    CHECK(report.ceiling_corrected_r == 0.75);
    auto text = report.render_text();
    CHECK(text.find("Prototype - Quadratic") != std::string::npos);
    CHECK(text.find("split-half reliability") != std::string::npos);
  }
}

TEST_SUITE_END();
