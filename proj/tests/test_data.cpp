#include "doctest.h"

#include "catfit/data.hpp"
#include "test_util.hpp"

using namespace catfit;

TEST_SUITE_BEGIN("data");

TEST_CASE("load_features parses a small file") {
  testutil::TempDir dir("data_load");
  auto path = dir.file("f.csv");
  testutil::write_text(path,
                       "id,label,f0,f1\n"
                       "a,A,0.5,1.5\n"
                       "b,A,-1,2\n"
                       "c,B,3,4\n");
  auto fm = load_features(path);
  CHECK(fm.n_stimuli() == 3);
  CHECK(fm.n_features() == 2);
  CHECK(fm.values(0, 0) == 0.5);
  CHECK(fm.values(2, 1) == 4.0);
  CHECK(fm.labels[0] == Category::A);
  CHECK(fm.labels[2] == Category::B);
  CHECK(fm.row_of("b") == 1);
}

TEST_CASE("load_features rejects bad input") {
  testutil::TempDir dir("data_bad");
  auto path = dir.file("f.csv");

  SUBCASE("non-finite value") {
    testutil::write_text(path, "id,label,f0\na,A,1\nb,B,nan\n");
    CHECK_THROWS_WITH_AS(load_features(path),
                         doctest::Contains("non-finite feature"),
                         ValidationError);
  }
  SUBCASE("duplicate id") {
    testutil::write_text(path, "id,label,f0\na,A,1\na,B,2\n");
    CHECK_THROWS_WITH_AS(load_features(path), doctest::Contains("duplicate id"),
                         ValidationError);
  }
  SUBCASE("ragged row") {
    testutil::write_text(path, "id,label,f0,f1\na,A,1,2\nb,B,3\n");
    CHECK_THROWS_WITH_AS(load_features(path), doctest::Contains("ragged"),
                         ValidationError);
  }
  SUBCASE("unknown label") {
    testutil::write_text(path, "id,label,f0\na,A,1\nb,C,2\n");
    CHECK_THROWS_WITH_AS(load_features(path),
                         doctest::Contains("unknown label"), ValidationError);
  }
  SUBCASE("custom label tokens") {
    testutil::write_text(path, "id,label,f0\na,plane,1\nb,bird,2\n");
    auto fm = load_features(path, LabelMap{"plane", "bird"});
    CHECK(fm.labels[0] == Category::A);
    CHECK(fm.labels[1] == Category::B);
  }
}

TEST_CASE("features file at full dataset scale") {
  // 1,005 + 1,032 = 2,037 stimuli; exercised at one feature column.
  testutil::TempDir dir("data_scale");
  auto path = dir.file("f.csv");
  std::string text = "id,label,f0\n";
  for (int i = 0; i < 1005; ++i)
    text += "bird" + std::to_string(i) + ",B," + std::to_string(i) + "\n";
  for (int i = 0; i < 1032; ++i)
    text += "plane" + std::to_string(i) + ",A," + std::to_string(i) + "\n";
  testutil::write_text(path, text);
  auto fm = load_features(path);
  CHECK(fm.n_stimuli() == 2037);
}

TEST_CASE("load_judgments aggregates trials") {
  testutil::TempDir dir("data_judg");
  auto path = dir.file("j.csv");
  testutil::write_text(path, "id,choice\nx,A\nx,A\nx,B\ny,B\n");
  auto js = load_judgments(path, JudgmentMode::Trials);
  CHECK(js.at("x").n_a == 2);
  CHECK(js.at("x").n_b == 1);
  CHECK(js.at("y").n_b == 1);
  CHECK(js.total_trials() == 4);
}

TEST_CASE("load_judgments counts mode and validation") {
  testutil::TempDir dir("data_judg2");
  auto path = dir.file("j.csv");

  SUBCASE("empty stimulus") {
    testutil::write_text(path, "id,n_A,n_B\nx,0,0\n");
    CHECK_THROWS_WITH_AS(load_judgments(path, JudgmentMode::Counts),
                         doctest::Contains("empty stimulus"), ValidationError);
  }
  SUBCASE("negative count") {
    testutil::write_text(path, "id,n_A,n_B\nx,-1,2\n");
    CHECK_THROWS_WITH_AS(load_judgments(path, JudgmentMode::Counts),
                         doctest::Contains("negative"), ValidationError);
  }
  SUBCASE("id missing from features") {
    testutil::write_text(path, "id,n_A,n_B\nzz,1,2\n");
    auto js = load_judgments(path, JudgmentMode::Counts);
    auto fm = testutil::random_features(4, 2, 7);
    CHECK_THROWS_WITH_AS(js.validate_against(fm), doctest::Contains("zz"),
                         ValidationError);
  }
}

TEST_CASE("counts file with a six-figure trial total") {
  // 2,037 stimuli averaging ~149 judgments, summing to 302,778.
  testutil::TempDir dir("data_total");
  auto path = dir.file("j.csv");
  std::string text = "id,n_A,n_B\n";
  long total = 0;
  for (int i = 0; i < 2037; ++i) {
    long t = 148 + (i < 1302 ? 1 : 0);
    text += "s" + std::to_string(i) + "," + std::to_string(t / 2) + "," +
            std::to_string(t - t / 2) + "\n";
    total += t;
  }
  REQUIRE(total == 302778);
  testutil::write_text(path, text);
  auto js = load_judgments(path, JudgmentMode::Counts);
  CHECK(js.total_trials() == 302778);
}

TEST_CASE("load_similarities dedupes and warns") {
  testutil::TempDir dir("data_sim");
  auto path = dir.file("s.csv");

  SUBCASE("symmetric lookup") {
    testutil::write_text(path, "id_a,id_b,rating\na,b,5\n");
    auto sr = load_similarities(path);
    CHECK(sr.n_pairs() == 1);
    CHECK(sr.lookup("b", "a") == 5.0);
  }
  SUBCASE("conflicting duplicate") {
    testutil::write_text(path, "id_a,id_b,rating\na,b,5\nb,a,6\n");
    CHECK_THROWS_WITH_AS(load_similarities(path), doctest::Contains("conflicting"),
                         ValidationError);
  }
  SUBCASE("identical duplicate is idempotent") {
    testutil::write_text(path, "id_a,id_b,rating\na,b,5\nb,a,5\n");
    CHECK(load_similarities(path).n_pairs() == 1);
  }
  SUBCASE("out-of-scale rating loads with a warning") {
    testutil::write_text(path, "id_a,id_b,rating\na,b,11.2\n");
    Warnings warnings;
    auto sr = load_similarities(path, &warnings);
    CHECK(sr.lookup("a", "b") == 11.2);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("outside the 0-10 scale") != std::string::npos);
  }
}

TEST_CASE("feature and judgment round trips are bit-exact") {
  testutil::TempDir dir("data_rt");
  auto fm = testutil::random_features(17, 5, 42);
  // Stress the formatter with awkward values.
  fm.values(0, 0) = 1.0 / 3.0;
  fm.values(1, 1) = 1e-300;
  fm.values(2, 2) = -9.87654321987654321e200;
  auto fpath = dir.file("f.csv");
  write_features(fpath, fm);
  auto fm2 = load_features(fpath);
  REQUIRE(fm2.n_stimuli() == fm.n_stimuli());
  REQUIRE(fm2.n_features() == fm.n_features());
  CHECK(fm2.values == fm.values);  // exact equality, not approximate
  CHECK(fm2.ids == fm.ids);

  auto js = testutil::random_judgments(fm, 31, 43);
  auto jpath = dir.file("j.csv");
  write_judgments(jpath, js);
  auto js2 = load_judgments(jpath, JudgmentMode::Counts);
  REQUIRE(js2.entries.size() == js.entries.size());
  for (std::size_t i = 0; i < js.entries.size(); ++i) {
    CHECK(js2.entries[i].n_a == js.entries[i].n_a);
    CHECK(js2.entries[i].n_b == js.entries[i].n_b);
  }
}

TEST_CASE("align_judgments maps counts onto feature rows") {
  auto fm = testutil::random_features(6, 3, 11);
  JudgmentSet js;
  js.entries.push_back({fm.ids[2], 3, 4});
  js.entries.push_back({fm.ids[5], 1, 0});
  js.rebuild_index();
  auto counts = align_judgments(fm, js);
  CHECK(counts.n_a[2] == 3.0);
  CHECK(counts.n_b[2] == 4.0);
  CHECK(counts.judged_rows == IndexList{2, 5});
  CHECK(counts.total() == 8.0);
}

TEST_SUITE_END();
