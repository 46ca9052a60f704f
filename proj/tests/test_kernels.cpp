#include "doctest.h"

#include <cmath>

#include "catfit/kernels.hpp"
#include "catfit/rng.hpp"
#include "test_util.hpp"

using namespace catfit;

TEST_SUITE_BEGIN("kernels");

TEST_CASE("mahalanobis_sq basics") {
  Vector mu = Vector::Zero(2);
  SUBCASE("identity covariance is squared Euclidean") {
    Vector y(2);
    y << 3, 4;
    CHECK(mahalanobis_sq(y, mu, Vector::Ones(2)) == doctest::Approx(25.0));
  }
  SUBCASE("diagonal scaling") {
    Vector y(2), sigma(2);
    y << 2, 2;
    sigma << 4, 1;
    CHECK(mahalanobis_sq(y, mu, sigma) == doctest::Approx(5.0));
  }
  SUBCASE("zero at the prototype") {
    Vector y(2);
    y << 1.25, -7;
    CHECK(mahalanobis_sq(y, y, Vector::Ones(2)) == 0.0);
  }
  SUBCASE("errors") {
    Vector y(3);
    y.setZero();
    CHECK_THROWS_AS(mahalanobis_sq(y, mu, Vector::Ones(2)), ValidationError);
    Vector bad(2);
    bad << 1, 0;
    Vector y2 = Vector::Zero(2);
    CHECK_THROWS_AS(mahalanobis_sq(y2, mu, bad), ValidationError);
  }
}

TEST_CASE("mahalanobis_sq identity matches squared Euclidean on random input") {
  Rng rng(1, "kernel-prop");
  for (int rep = 0; rep < 50; ++rep) {
    int d = 1 + static_cast<int>(rng.next_below(8));
    Vector y(d), mu(d);
    for (int k = 0; k < d; ++k) {
      y[k] = rng.next_normal();
      mu[k] = rng.next_normal();
    }
    double md = mahalanobis_sq(y, mu, Vector::Ones(d));
    double sq = (y - mu).squaredNorm();
    CHECK(std::abs(md - sq) <= 1e-12 * std::max(1.0, sq));
  }
}

TEST_CASE("variance scaling is inverse-homogeneous in mahalanobis_sq") {
  Rng rng(2, "kernel-hom");
  Vector y(4), mu(4), sigma(4);
  for (int k = 0; k < 4; ++k) {
    y[k] = rng.next_normal();
    mu[k] = rng.next_normal();
    sigma[k] = 0.5 + rng.next_double();
  }
  double base = mahalanobis_sq(y, mu, sigma);
  for (double s : {0.25, 2.0, 117.0}) {
    double scaled = mahalanobis_sq(y, mu, (s * sigma).eval());
    CHECK(scaled == doctest::Approx(base / s).epsilon(1e-12));
  }
}

TEST_CASE("weighted_minkowski basics") {
  SUBCASE("symmetric diff") {
    Vector y(2), x(2);
    y << 0, 0;
    x << 2, 2;
    AttentionWeights w = AttentionWeights::uniform(2);
    CHECK(weighted_minkowski(y, x, w) == doctest::Approx(2.0));
  }
  SUBCASE("zero at equality") {
    Vector y(3);
    y << 1, 2, 3;
    CHECK(weighted_minkowski(y, y, AttentionWeights::uniform(3)) == 0.0);
  }
  SUBCASE("masked dimension") {
    Vector y(2), x(2);
    y << 0, 0;
    x << 3, 100;
    AttentionWeights w;
    w.w = Vector(2);
    w.w << 1, 0;  // degenerate weight used only to mask
    CHECK(weighted_minkowski(y, x, w) == doctest::Approx(3.0));
  }
  SUBCASE("length mismatch") {
    Vector y(2), x(3);
    y.setZero();
    x.setZero();
    CHECK_THROWS_AS(weighted_minkowski(y, x, AttentionWeights::uniform(2)),
                    ValidationError);
  }
}

TEST_CASE("weighted_minkowski is symmetric and satisfies the triangle inequality") {
  Rng rng(3, "kernel-tri");
  for (int rep = 0; rep < 100; ++rep) {
    Vector a(3), b(3), c(3), z(3);
    for (int k = 0; k < 3; ++k) {
      a[k] = rng.next_normal();
      b[k] = rng.next_normal();
      c[k] = rng.next_normal();
      z[k] = rng.next_normal();
    }
    AttentionWeights w = AttentionWeights::from_logits(z);
    double ab = weighted_minkowski(a, b, w);
    double ba = weighted_minkowski(b, a, w);
    double ac = weighted_minkowski(a, c, w);
    double cb = weighted_minkowski(c, b, w);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
    CHECK(ab <= ac + cb + 1e-12);
  }
}

TEST_CASE("exp_similarity") {
  CHECK(exp_similarity(0.0) == 1.0);
  CHECK(exp_similarity(1.0, 1.0, 2.0) == doctest::Approx(0.36787944117144233));
  CHECK(exp_similarity(0.0, 2.0) == 1.0);
  SUBCASE("strictly decreasing in distance") {
    double prev = exp_similarity(0.0, 1.3);
    for (double d = 0.1; d < 3.0; d += 0.1) {
      double cur = exp_similarity(d, 1.3);
      CHECK(cur < prev);
      prev = cur;
    }
  }
  SUBCASE("saturates without throwing") {
    CHECK(exp_similarity(1e6, 10.0) == 0.0);
  }
}

TEST_CASE("attention weights materialize on the simplex") {
  Rng rng(4, "kernel-attn");
  for (int rep = 0; rep < 20; ++rep) {
    Vector z(5);
    for (int k = 0; k < 5; ++k) z[k] = 10.0 * rng.next_normal();
    auto w = AttentionWeights::from_logits(z);
    w.validate();
    CHECK(w.w.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // shift invariance
    auto w2 = AttentionWeights::from_logits((z.array() + 123.0).matrix().eval());
    CHECK((w.w - w2.w).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("empirical_category_stats") {
  FeatureMatrix fm;
  fm.values.resize(4, 2);
  fm.values << 0, 0, 2, 2, 5, 5, 9, 9;
  fm.ids = {"a1", "a2", "b1", "b2"};
  fm.labels = {Category::A, Category::A, Category::B, Category::B};
  fm.rebuild_index();

  SUBCASE("hand-checked mean and n-1 variance") {
    auto st = empirical_category_stats(fm, Category::A);
    CHECK(st.mu[0] == doctest::Approx(1.0));
    CHECK(st.mu[1] == doctest::Approx(1.0));
    // floor is ~1e-8 relative, swamped by the 1e-6 tolerance here
    CHECK(st.var_diag[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(st.pooled == doctest::Approx(2.0).epsilon(1e-6));
  }
  SUBCASE("identical members hit the variance floor") {
    FeatureMatrix degen;
    degen.values.resize(4, 2);
    degen.values << 3, 3, 3, 3, 0, 1, 2, 7;
    degen.ids = {"a1", "a2", "b1", "b2"};
    degen.labels = {Category::A, Category::A, Category::B, Category::B};
    degen.rebuild_index();
    auto st = empirical_category_stats(degen, Category::A);
    double eps = variance_floor(degen);
    CHECK(eps > 0.0);
    CHECK(st.var_diag[0] == doctest::Approx(eps));
    CHECK(st.var_diag[1] == doctest::Approx(eps));
  }
  SUBCASE("single member is an error") {
    FeatureMatrix tiny;
    tiny.values.resize(3, 1);
    tiny.values << 1, 2, 3;
    tiny.ids = {"a1", "b1", "b2"};
    tiny.labels = {Category::A, Category::B, Category::B};
    tiny.rebuild_index();
    CHECK_THROWS_WITH_AS(empirical_category_stats(tiny, Category::A),
                         doctest::Contains("at least 2 members"),
                         ValidationError);
  }
}

TEST_SUITE_END();
