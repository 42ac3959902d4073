#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "simplexbessel/sampler.hpp"

using namespace simplexbessel;

namespace {

struct Moments {
  double mean = 0, var = 0;
  // Standard error of the sample variance, from the fourth central moment.
  double var_se = 0;
};

Moments moments(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  const double n = static_cast<double>(v.size());
  const double mean = s / n;
  double m2 = 0, m4 = 0;
  for (double x : v) {
    const double d = (x - mean) * (x - mean);
    m2 += d;
    m4 += d * d;
  }
  m2 /= n;
  m4 /= n;
  return {mean, m2, std::sqrt((m4 - m2 * m2) / n)};
}

std::vector<double> gap_column(const SampleBatch& b, std::size_t i) {
  std::vector<double> out;
  std::vector<double> g(b.params.n() + 1);
  for (const auto& pt : b.points) {
    gaps_of(pt, g);
    out.push_back(g[i]);
  }
  return out;
}

// P(x^1 <= a, x^2 <= b) for N = 2 with Dirichlet(alpha, alpha, alpha) gaps:
// x^1 ~ Beta(alpha, 2 alpha) and g_2 / (1 - x^1) ~ Beta(alpha, alpha).
double joint_cdf(double alpha, double a, double b) {
  a = std::min(a, b);
  if (a <= 0) return 0.0;
  boost::math::beta_distribution<double> first(alpha, 2 * alpha);
  boost::math::quadrature::tanh_sinh<double> integrator;
  auto f = [&](double x) {
    const double z = std::clamp((b - x) / (1 - x), 0.0, 1.0);
    return boost::math::pdf(first, x) * boost::math::ibeta(alpha, alpha, z);
  };
  return integrator.integrate(f, 0.0, a);
}

}  // namespace

TEST_CASE("invariant gap means and variances match the Dirichlet moments") {
  for (auto [n, beta] : {std::pair{2, 3.0}, {4, 2.5}, {3, 1.0}, {1, 6.0}}) {
    const ModelParams p(n, beta);
    RngStream rng(7, static_cast<std::uint64_t>(n));
    const auto batch = sample_invariant(p, rng, 100000);
    const double bp = p.beta_prime();
    const double var = bp * (beta - bp) / (beta * beta * (beta + 1));
    for (int i = 0; i <= n; ++i) {
      const auto m = moments(gap_column(batch, i));
      CHECK(std::abs(m.mean - 1.0 / (n + 1)) < 3 * std::sqrt(var / 1e5));
      CHECK(std::abs(m.var - var) < 3 * m.var_se);
    }
  }
  // Hand value from the moment formula at N = 2, beta = 3.
  const double bp = 1.0, beta = 3.0;
  CHECK(bp * (beta - bp) / (beta * beta * (beta + 1)) == doctest::Approx(1.0 / 18));
}

TEST_CASE("N = 1, beta = 2 is uniform") {
  RngStream rng(8, 0);
  const auto batch = sample_invariant(ModelParams(1, 2.0), rng, 100000);
  std::vector<double> x;
  for (const auto& pt : batch.points) x.push_back(pt[0]);
  const auto m = moments(x);
  CHECK(std::abs(m.mean - 0.5) < 3 * std::sqrt(1.0 / 12 / 1e5));
  CHECK(std::abs(m.var - 1.0 / 12) < 3 * std::sqrt(1.0 / 180 / 1e5));
}

TEST_CASE("x^1 marginal at N = 4, beta = 2.5 passes a KS test against Beta(0.5, 2)") {
  RngStream rng(9, 0);
  const std::size_t n = 100000;
  const auto batch = sample_invariant(ModelParams(4, 2.5), rng, n);
  std::vector<double> x;
  for (const auto& pt : batch.points) x.push_back(pt[0]);
  std::sort(x.begin(), x.end());
  boost::math::beta_distribution<double> law(0.5, 2.0);
  double d = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = boost::math::cdf(law, x[i]);
    d = std::max({d, f - static_cast<double>(i) / n,
                  static_cast<double>(i + 1) / n - f});
  }
  CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("2-D histogram of N = 2 matches quadrature cell masses") {
  const int bins = 20;
  const std::size_t draws = 1000000;
  for (double beta : {1.5, 3.0, 6.0}) {
    const double alpha = beta / 3;
    std::vector<double> grid_cdf((bins + 1) * (bins + 1));
    for (int i = 0; i <= bins; ++i) {
      for (int j = 0; j <= bins; ++j) {
        grid_cdf[i * (bins + 1) + j] = joint_cdf(alpha, i / double(bins), j / double(bins));
      }
    }
    RngStream rng(10, static_cast<std::uint64_t>(beta * 10));
    std::vector<double> counts(bins * bins, 0.0);
    std::vector<double> x(2);
    for (std::size_t k = 0; k < draws; ++k) {
      draw_invariant(ModelParams(2, beta), rng, x);
      const int i = std::min(bins - 1, static_cast<int>(x[0] * bins));
      const int j = std::min(bins - 1, static_cast<int>(x[1] * bins));
      counts[i * bins + j] += 1;
    }
    double chi2 = 0, pooled_obs = 0, pooled_exp = 0;
    int dof = 0;
    for (int i = 0; i < bins; ++i) {
      for (int j = 0; j < bins; ++j) {
        auto F = [&](int a, int b) { return grid_cdf[a * (bins + 1) + b]; };
        const double mass = F(i + 1, j + 1) - F(i, j + 1) - F(i + 1, j) + F(i, j);
        const double expected = mass * draws;
        const double observed = counts[i * bins + j];
        if (j < i) {
          CHECK(observed == 0.0);
          continue;
        }
        if (expected < 5) {
          pooled_obs += observed;
          pooled_exp += expected;
          continue;
        }
        chi2 += (observed - expected) * (observed - expected) / expected;
        ++dof;
      }
    }
    if (pooled_exp > 0) {
      chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
      ++dof;
    }
    boost::math::chi_squared_distribution<double> law(dof - 1);
    const double pvalue = boost::math::cdf(boost::math::complement(law, chi2));
    INFO("beta=" << beta << " chi2=" << chi2 << " dof=" << dof - 1);
    CHECK(pvalue > 0.001);
  }
}

TEST_CASE("gap law is exchangeable") {
  RngStream rng(11, 0);
  const auto batch = sample_invariant(ModelParams(3, 1.2), rng, 100000);
  const auto m0 = moments(gap_column(batch, 0));
  const auto m3 = moments(gap_column(batch, 3));
  const double se = std::sqrt(2 * m0.var / 1e5);
  CHECK(std::abs(m0.mean - m3.mean) < 3 * se);
  CHECK(std::abs(m0.var - m3.var) <
        3 * std::sqrt(m0.var_se * m0.var_se + m3.var_se * m3.var_se));
}

TEST_CASE("sampling is deterministic per stream") {
  RngStream a(5, 3), b(5, 3);
  const auto ba = sample_invariant(ModelParams(3, 0.8), a, 1000);
  const auto bb = sample_invariant(ModelParams(3, 0.8), b, 1000);
  CHECK(ba.points == bb.points);
  for (const auto& pt : ba.points) CHECK(in_closed_simplex(pt));
  CHECK(ba.seed_record.seed() == 5);
  CHECK(ba.seed_record.stream_id() == 3);
}

TEST_CASE("uniform simplex sampler") {
  RngStream rng(12, 0);
  const auto batch = sample_uniform_simplex(2, rng, 100000);
  double above = 0;
  for (const auto& pt : batch.points) {
    CHECK(in_closed_simplex(pt));
    above += pt[0] > 0.5;
  }
  const double p = above / 1e5;
  CHECK(std::abs(p - 0.25) < 3 * std::sqrt(0.25 * 0.75 / 1e5));
  CHECK_THROWS(sample_uniform_simplex(2, rng, 0));
}

TEST_CASE("probe points hit the requested degeneracy") {
  RngStream rng(13, 0);
  for (int n = 1; n <= 4; ++n) {
    for (int d = 0; d <= n; ++d) {
      for (const auto& y : probe_points(n, d, 200, rng)) {
        CHECK(degeneracy_d(y) == d);
        const auto t = fold_T(y);
        CHECK(t.back() <= kProbeCeiling + 1e-12);
        double prev = 0;
        for (double v : t) {
          const double g = v - prev;
          CHECK((g == 0.0 || g >= kProbeSeparation - 1e-12));
          prev = v;
        }
        if (d == 0) {
          CHECK(std::adjacent_find(t.begin(), t.end()) == t.end());
          CHECK(t.front() > 0);
        }
        if (d == n) CHECK(t == std::vector<double>(n, 0.0));
      }
    }
  }
  CHECK_THROWS(probe_points(3, 4, 1, rng));
  CHECK_THROWS(probe_points(20, 0, 1, rng));
}

TEST_CASE("sample CSV has a header and 17 significant digits") {
  RngStream rng(14, 0);
  const auto batch = sample_invariant(ModelParams(2, 3.0), rng, 3);
  std::ostringstream os;
  write_csv(os, batch);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "x1,x2");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    const double v = std::stod(line.substr(0, line.find(',')));
    CHECK(v == batch.points[rows - 1][0]);
  }
  CHECK(rows == 3);
}
