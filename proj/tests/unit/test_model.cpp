#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "simplexbessel/diagnostics.hpp"
#include "simplexbessel/model.hpp"
#include "simplexbessel/sampler.hpp"

using namespace simplexbessel;

namespace {

std::vector<double> random_interior(int n, std::mt19937_64& gen,
                                    double min_gap = 1e-3) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  for (;;) {
    std::vector<double> x(n);
    for (auto& v : x) v = u(gen);
    std::sort(x.begin(), x.end());
    std::vector<double> g(n + 1);
    gaps_of(x, g);
    if (*std::min_element(g.begin(), g.end()) > min_gap) return x;
  }
}

TestVectorField profile_field(std::function<double(double)> phi,
                              std::function<double(double)> dphi) {
  TestVectorField f;
  f.weight = [](std::span<const double>) { return 1.0; };
  f.weight_gradient = [](std::span<const double>, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
  };
  f.profile = std::move(phi);
  f.profile_derivative = std::move(dphi);
  return f;
}

}  // namespace

TEST_CASE("ModelParams validates and derives beta prime") {
  const ModelParams p(3, 2.0);
  CHECK(p.beta_prime() == 0.5);
  CHECK_THROWS_AS(ModelParams(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams(2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams(2, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams(2, std::nan("")), std::invalid_argument);
}

TEST_CASE("SimplexPoint and GapVector round trip") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 6;
    const auto x = random_interior(n, gen);
    const GapVector g = GapVector::from_point(x);
    REQUIRE(g.size() == static_cast<std::size_t>(n + 1));
    double sum = 0.0;
    for (double v : g.gaps()) sum += v;
    CHECK(std::abs(sum - 1.0) <= kSimplexTolerance);
    const SimplexPoint back = g.to_point();
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(back[i] - x[i]) <= kSimplexTolerance);
    }
  }
  CHECK_THROWS(SimplexPoint({0.5, 0.4}));
  CHECK_THROWS(SimplexPoint({-0.1}));
  CHECK_THROWS(SimplexPoint({1.1}));
  CHECK_NOTHROW(SimplexPoint({0.0, 0.0, 1.0}));
  CHECK_THROWS(GapVector({0.5, 0.6}));
  CHECK_THROWS(GapVector({1.2, -0.2}));
}

TEST_CASE("log_density examples") {
  CHECK(log_density(ModelParams(2, 3.0), std::vector<double>{0.1, 0.7}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-13));
  CHECK(log_density(ModelParams(1, 2.0), std::vector<double>{0.5}) ==
        doctest::Approx(0.0).epsilon(1e-13));
  // Gamma(1/2)^2 / Gamma(1) = pi.
  const double expected =
      std::log(1.0 / std::numbers::pi) - 0.5 * (std::log(0.25) + std::log(0.75));
  CHECK(log_density(ModelParams(1, 1.0), std::vector<double>{0.25}) ==
        doctest::Approx(expected).epsilon(1e-13));
  CHECK(expected == doctest::Approx(-0.307742).epsilon(1e-5));
}

TEST_CASE("log_density normalization by 1-D quadrature") {
  // N = 1, beta = 1: density gap^{-1/2} (1 - gap)^{-1/2} / pi. Substituting
  // gap = sin^2(theta) makes the integrand smooth.
  const ModelParams p(1, 1.0);
  const int m = 20000;
  double sum = 0.0;
  for (int k = 0; k < m; ++k) {
    const double theta = (k + 0.5) * (std::numbers::pi / 2) / m;
    const double s = std::sin(theta), c = std::cos(theta);
    const double x = s * s;
    sum += std::exp(log_density(p, std::vector<double>{x})) * 2 * s * c;
  }
  CHECK(sum * (std::numbers::pi / 2) / m == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("log_density boundary values carry the sign of beta' - 1") {
  const std::vector<double> boundary{0.0, 0.5};
  CHECK(log_density(ModelParams(2, 1.5), boundary) ==
        std::numeric_limits<double>::infinity());
  CHECK(log_density(ModelParams(2, 6.0), boundary) ==
        -std::numeric_limits<double>::infinity());
  CHECK(log_density(ModelParams(2, 3.0), boundary) ==
        doctest::Approx(std::log(2.0)));
}

TEST_CASE("drift examples and zero-gap errors") {
  const auto b = drift(ModelParams(2, 6.0), std::vector<double>{0.25, 0.5});
  CHECK(b[0] == doctest::Approx(0.0));
  CHECK(b[1] == doctest::Approx(2.0));
  for (double v : drift(ModelParams(3, 4.0), std::vector<double>{0.1, 0.2, 0.9})) {
    CHECK(v == 0.0);
  }
  try {
    drift(ModelParams(2, 6.0), std::vector<double>{0.3, 0.3});
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(e.gap_index() == 2);
  }
}

TEST_CASE("drift is the gradient of log_density") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> beta_dist(0.3, 12.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 6;
    const ModelParams p(n, beta_dist(gen));
    auto x = random_interior(n, gen);
    const auto b = drift(p, x);
    for (int i = 0; i < n; ++i) {
      auto xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (log_density(p, xp) - log_density(p, xm)) / (2 * h);
      const double scale = std::max(1.0, std::abs(b[i]));
      CHECK(std::abs(fd - b[i]) / scale < 1e-5);
    }
  }
}

TEST_CASE("potential_V examples") {
  CHECK(potential_V(std::vector<double>{0.5}) ==
        doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));
  CHECK(potential_V(std::vector<double>{1.0 / 3, 2.0 / 3}) ==
        doctest::Approx(3 * std::log(3.0)).epsilon(1e-14));
  CHECK(potential_V(std::vector<double>{0.0, 0.4}) ==
        std::numeric_limits<double>::infinity());
  CHECK(potential_V(std::vector<double>{0.4, 1.0}) ==
        std::numeric_limits<double>::infinity());
  // exp(-(beta'-1) V) / Z is the density.
  const ModelParams p(2, 1.7);
  const std::vector<double> x{0.2, 0.55};
  CHECK(log_density(p, x) ==
        doctest::Approx(-(p.beta_prime() - 1) * potential_V(x) -
                        p.log_normalizer())
            .epsilon(1e-13));
}

TEST_CASE("hessian_quadratic_form examples and finite-difference oracle") {
  CHECK(hessian_quadratic_form(std::vector<double>{0.5}, std::vector<double>{1.0}) ==
        doctest::Approx(8.0));
  CHECK(hessian_quadratic_form(std::vector<double>{0.25, 0.5},
                               std::vector<double>{1.0, 1.0}) ==
        doctest::Approx(20.0));
  CHECK(hessian_quadratic_form(std::vector<double>{0.25, 0.5},
                               std::vector<double>{0.0, 0.0}) == 0.0);
  CHECK_THROWS_AS(hessian_quadratic_form(std::vector<double>{0.0, 0.5},
                                         std::vector<double>{1.0, 1.0}),
                  DomainError);

  std::mt19937_64 gen(3);
  std::normal_distribution<double> nd;
  const double h = 1e-4;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 5;
    auto x = random_interior(n, gen, 0.05);
    std::vector<double> xi(n);
    for (auto& v : xi) v = nd(gen);
    // Second directional derivative of V along xi.
    auto shifted = [&](double s) {
      auto y = x;
      for (int i = 0; i < n; ++i) y[i] += s * xi[i];
      return potential_V(y);
    };
    const double fd = (shifted(h) - 2 * shifted(0) + shifted(-h)) / (h * h);
    const double exact = hessian_quadratic_form(x, xi);
    CHECK(fd == doctest::Approx(exact).epsilon(1e-4));
  }
}

TEST_CASE("hessian bound k_N |xi|^2 at invariant samples") {
  RngStream rng(11, 0);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> nd;
  for (int n = 1; n <= 4; ++n) {
    const ModelParams p(n, 2.0 * (n + 1));
    const double k = k_constant(n);
    const auto batch = sample_invariant(p, rng, 50);
    for (const auto& x : batch.points) {
      for (int draw = 0; draw < 20; ++draw) {
        std::vector<double> xi(n);
        double norm = 0.0;
        for (auto& v : xi) {
          v = nd(gen);
          norm += v * v;
        }
        for (auto& v : xi) v /= std::sqrt(norm);
        CHECK(hessian_quadratic_form(x, xi) >= k * (1 - 1e-12));
      }
    }
  }
}

TEST_CASE("log_density integrates to one against the uniform simplex") {
  RngStream rng(12, 0);
  for (int n = 1; n <= 3; ++n) {
    const ModelParams p(n, 1.8 * n);
    const auto batch = sample_uniform_simplex(n, rng, 200000);
    double volume = 1.0;
    for (int k = 2; k <= n; ++k) volume /= k;
    double s = 0.0, s2 = 0.0;
    for (const auto& x : batch.points) {
      const double v = std::exp(log_density(p, x)) * volume;
      s += v;
      s2 += v * v;
    }
    const double m = static_cast<double>(batch.points.size());
    const double mean = s / m;
    const double se = std::sqrt((s2 / m - mean * mean) / m);
    CHECK(std::abs(mean - 1.0) < 3 * se);
  }
}

TEST_CASE("ibp_functional examples") {
  auto f = profile_field([](double y) { return y * (1 - y); },
                         [](double y) { return 1 - 2 * y; });
  CHECK(ibp_functional(ModelParams(1, 2.0), std::vector<double>{0.5}, f) ==
        doctest::Approx(0.0));
  CHECK(ibp_functional(ModelParams(1, 2.0), std::vector<double>{0.25}, f) ==
        doctest::Approx(0.5));
  auto s = profile_field([](double y) { return std::sin(std::numbers::pi * y); },
                         [](double y) {
                           return std::numbers::pi * std::cos(std::numbers::pi * y);
                         });
  CHECK(ibp_functional(ModelParams(2, 3.0), std::vector<double>{1.0 / 3, 2.0 / 3},
                       s) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(ibp_functional(ModelParams(2, 3.0),
                                 std::vector<double>{0.5, 0.5}, s),
                  DomainError);
}

TEST_CASE("ibp_functional is affine in beta with the difference-quotient slope") {
  auto f = profile_field([](double y) { return y * y * (1 - y); },
                         [](double y) { return 2 * y - 3 * y * y; });
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const auto x = random_interior(n, gen);
    double quotient = 0.0;
    double prev = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double next = i < n ? x[i] : 1.0;
      quotient += (f.profile(next) - f.profile(prev)) / (next - prev);
      prev = next;
    }
    const double slope = quotient / (n + 1);
    const double v1 = ibp_functional(ModelParams(n, 1.0), x, f);
    const double v2 = ibp_functional(ModelParams(n, 4.0), x, f);
    CHECK((v2 - v1) / 3.0 == doctest::Approx(slope).epsilon(1e-10));
  }
}

TEST_CASE("TestVectorField rejects profiles not vanishing at the ends") {
  auto bad = profile_field([](double y) { return y; }, [](double) { return 1.0; });
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  auto good = profile_field([](double y) { return y * (1 - y); },
                            [](double y) { return 1 - 2 * y; });
  CHECK_NOTHROW(good.validate());
}
