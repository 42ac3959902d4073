#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "simplexbessel/model.hpp"
#include "simplexbessel/symmetry.hpp"

using namespace simplexbessel;

TEST_CASE("ExtensionParams enforces the delta range") {
  const ModelParams p(2, 3.0);
  CHECK_NOTHROW(ExtensionParams(p, 0.1));
  CHECK_THROWS_AS(ExtensionParams(p, 0.125), std::invalid_argument);
  CHECK_THROWS_AS(ExtensionParams(p, 0.0), std::invalid_argument);
  CHECK(ExtensionParams::max_delta(2) == doctest::Approx(0.125));
}

TEST_CASE("fold_T examples") {
  const auto t = fold_T(std::vector<double>{-0.5, 0.2, -0.1});
  CHECK(t == std::vector<double>{0.1, 0.2, 0.5});
  CHECK(fold_T(std::vector<double>{0, 0, 0}) == std::vector<double>{0, 0, 0});
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> y(1 + k % 5);
    for (auto& v : y) v = u(gen);
    const auto once = fold_T(y);
    CHECK(fold_T(once) == once);
    CHECK(std::is_sorted(once.begin(), once.end()));
    CHECK(once.front() >= 0.0);
  }
}

TEST_CASE("reflect_H examples and involution") {
  const SimplexPoint x({0.2, 0.3});
  const auto h0 = reflect_H(0, x);
  CHECK(h0[0] == doctest::Approx(0.7));
  CHECK(h0[1] == doctest::Approx(0.8));
  CHECK(reflect_H(2, x) == x);
  CHECK_THROWS_AS(reflect_H(3, x), std::out_of_range);
  CHECK_THROWS_AS(reflect_H(-1, x), std::out_of_range);

  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 1000; ++k) {
    const int n = 1 + k % 6;
    std::vector<double> c(n);
    for (auto& v : c) v = u(gen);
    std::sort(c.begin(), c.end());
    const SimplexPoint p(c);
    const int i = k % (n + 1);
    const auto once = reflect_H(i, p);
    CHECK(in_closed_simplex(once));
    const auto twice = reflect_H(i, once);
    for (int j = 0; j < n; ++j) {
      CHECK(std::abs(twice[j] - c[j]) <= kSimplexTolerance);
    }
    // The gap multiset is preserved, hence so is the density.
    const ModelParams mp(n, 0.7 + 0.3 * (k % 11));
    CHECK(log_density(mp, once) ==
          doctest::Approx(log_density(mp, p)).epsilon(1e-10));
  }
}

TEST_CASE("extended_weight examples") {
  CHECK(extended_weight(ExtensionParams(ModelParams(1, 2.0), 0.1),
                        std::vector<double>{0.5}) == doctest::Approx(1.0));
  // beta = 1, N = 1: q(0.5) = (1/pi) (0.25)^{-1/2} = 2/pi.
  const ExtensionParams e1(ModelParams(1, 1.0), 0.1);
  CHECK(extended_weight(e1, std::vector<double>{-0.5}) ==
        doctest::Approx(2.0 / std::numbers::pi).epsilon(1e-12));
  CHECK(extended_weight(e1, std::vector<double>{-0.5}) ==
        extended_weight(e1, std::vector<double>{0.5}));
  CHECK(extended_weight(ExtensionParams(ModelParams(2, 3.0), 0.05),
                        std::vector<double>{0.97, 0.98}) == doctest::Approx(2.0));
}

TEST_CASE("extended_weight is invariant under sign flips and permutations") {
  const ExtensionParams ep(ModelParams(3, 2.2), 0.08);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> y(3);
    for (auto& v : y) v = u(gen);
    auto z = y;
    std::shuffle(z.begin(), z.end(), gen);
    for (auto& v : z) {
      if (gen() & 1) v = -v;
    }
    CHECK(extended_weight(ep, z) == extended_weight(ep, y));
  }
}

TEST_CASE("extended_weight agrees with q_N on Omega_N") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> u(0, 1);
  for (int n = 1; n <= 4; ++n) {
    const ExtensionParams ep(ModelParams(n, 0.9 + n), 0.5 * ExtensionParams::max_delta(n));
    for (int k = 0; k < 200; ++k) {
      std::vector<double> x(n);
      for (auto& v : x) v = u(gen) * (1 - ep.delta());
      std::sort(x.begin(), x.end());
      const double q = std::exp(log_density(ep.model(), x));
      CHECK(extended_weight(ep, x) == doctest::Approx(q).epsilon(1e-12));
    }
  }
}

TEST_CASE("extended_weight is comparable to the folded gap product") {
  for (double beta : {1.0, 2.0, 5.0}) {
    const ExtensionParams ep(ModelParams(2, beta), 0.1);
    const double bp = ep.model().beta_prime();
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1, 1);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int k = 0; k < 100000; ++k) {
      std::vector<double> y{u(gen), u(gen)};
      const auto t = fold_T(y);
      const double lp = (bp - 1) * (std::log(t[0]) + std::log(t[1] - t[0]));
      const double r = log_extended_weight(ep, y) - lp;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    REQUIRE(std::isfinite(lo));
    REQUIRE(std::isfinite(hi));
    CHECK(hi - lo <= std::abs(bp - 1) * std::log(1 / ep.delta()) + std::log(2.0));
  }
}

TEST_CASE("degeneracy_d and scaling_exponent_h examples") {
  CHECK(degeneracy_d(std::vector<double>{0.3, 0.3, 0.7}) == 1);
  CHECK(degeneracy_d(std::vector<double>{0.0, 0.0, 0.0}) == 3);
  CHECK(degeneracy_d(std::vector<double>{0.1, -0.4, 0.7}) == 0);
  CHECK(degeneracy_d(std::vector<double>{-0.3, 0.3, 0.7}) == 1);
  CHECK(degeneracy_d(std::vector<double>{0.3, 0.3 + 1e-9}, 1e-8) == 1);
  CHECK(degeneracy_d(std::vector<double>{0.3, 0.3 + 1e-9}) == 0);

  CHECK(scaling_exponent_h(ModelParams(3, 2.0), std::vector<double>{0.1, 0.2, 0.3}) == 3.0);
  CHECK(scaling_exponent_h(ModelParams(3, 2.0), std::vector<double>{0.3, 0.3, 0.7}) ==
        doctest::Approx(2.5));
  CHECK(scaling_exponent_h(ModelParams(2, 3.0), std::vector<double>{0.0, 0.0}) ==
        doctest::Approx(2.0));
}
