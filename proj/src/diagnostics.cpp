#include "simplexbessel/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "simplexbessel/parallel.hpp"

namespace simplexbessel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct LineFit {
  double slope = 0.0;
  double slope_stderr = 0.0;
};

LineFit least_squares(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  LineFit fit;
  fit.slope = sxy / sxx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double r = ys[k] - my - fit.slope * (xs[k] - mx);
      rss += r * r;
    }
    fit.slope_stderr = std::sqrt(rss / (n - 2) / sxx);
  }
  return fit;
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double c : v) s += c * c;
  return std::sqrt(s);
}

void random_unit(RngStream& rng, std::span<double> out) {
  double r = 0.0;
  do {
    for (auto& c : out) c = rng.normal();
    r = norm(out);
  } while (r == 0.0);
  for (auto& c : out) c /= r;
}

// Mean series over the given multiplicities; returns the fitted rate or NaN
// when the window is shorter than five points.
double rate_from_counts(const DistanceTable& table,
                        std::span<const std::uint32_t> counts, double floor,
                        std::vector<double>& mean, std::size_t* window) {
  const std::size_t m = table.times.size();
  mean.assign(m, 0.0);
  std::size_t total = 0;
  for (std::size_t j = 0; j < table.rows.size(); ++j) {
    if (counts[j] == 0) continue;
    total += counts[j];
    const auto& row = table.rows[j];
    for (std::size_t k = 0; k < m; ++k) mean[k] += counts[j] * row[k];
  }
  for (auto& v : mean) v /= static_cast<double>(total);
  std::size_t w = 0;
  while (w < m && mean[w] > floor) ++w;
  if (window) *window = w;
  if (w < 5) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> logs(w);
  for (std::size_t k = 0; k < w; ++k) logs[k] = std::log(mean[k]);
  return -least_squares(std::span(table.times).first(w), logs).slope;
}

}  // namespace

double k_constant(int n) {
  if (n < 1) throw std::invalid_argument("k_constant: n must be >= 1");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = 2.0;
    if (i + 1 < n) a(i, i + 1) = a(i + 1, i) = -1.0;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      a, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

double contraction_rate(const ModelParams& p) {
  return (p.beta_prime() - 1.0) * k_constant(p.n());
}

RateFit fit_decay(const DistanceTable& table, double merge_tol,
                  RngStream bootstrap_rng, int resamples) {
  const std::size_t pairs = table.rows.size();
  if (pairs < 100) throw EstimatorError("fit_decay: need at least 100 pairs");
  for (const auto& row : table.rows) {
    if (row.size() != table.times.size()) {
      throw EstimatorError("fit_decay: pairs are not on a common grid");
    }
  }
  const double floor = 10.0 * merge_tol;
  RateFit fit;
  fit.times = table.times;
  std::vector<std::uint32_t> counts(pairs, 1);
  fit.fitted_rate =
      rate_from_counts(table, counts, floor, fit.mean_distances, &fit.window);
  if (std::isnan(fit.fitted_rate)) {
    throw EstimatorError("fit_decay: fewer than 5 grid points above 10 merge_tol");
  }
  std::vector<double> scratch;
  double sum = 0.0;
  double sum_sq = 0.0;
  int used = 0;
  for (int b = 0; b < resamples; ++b) {
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t j = 0; j < pairs; ++j) ++counts[bootstrap_rng() % pairs];
    const double rate = rate_from_counts(table, counts, floor, scratch, nullptr);
    if (std::isnan(rate)) continue;
    sum += rate;
    sum_sq += rate * rate;
    ++used;
  }
  if (used > 1) {
    const double mean = sum / used;
    fit.stderr_ = std::sqrt(std::max(0.0, (sum_sq - used * mean * mean) / (used - 1)));
  }
  return fit;
}

RateFit fit_decay(std::span<const CoupledPair> pairs, double merge_tol,
                  RngStream bootstrap_rng, int resamples) {
  if (pairs.empty()) throw EstimatorError("fit_decay: need at least 100 pairs");
  DistanceTable table;
  table.times = pairs.front().a.times;
  table.rows.reserve(pairs.size());
  for (const auto& pair : pairs) {
    if (pair.a.times != table.times) {
      throw EstimatorError("fit_decay: pairs are not on a common grid");
    }
    table.rows.push_back(pair.distances);
  }
  return fit_decay(table, merge_tol, bootstrap_rng, resamples);
}

std::pair<double, double> lipschitz_ratio_core(
    std::span<const std::vector<double>> displacements,
    std::span<const double> u, double separation) {
  const std::size_t n = displacements.size();
  if (n < 2 || !(separation > 0.0)) {
    throw std::invalid_argument(
        "lipschitz_ratio_core: need two paths and a positive separation");
  }
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& d : displacements) {
    double proj = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) proj += u[i] * d[i];
    sum += proj;
    sum_sq += proj * proj;
  }
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1));
  return {std::abs(mean) / separation, std::sqrt(var / n) / separation};
}

LipschitzEstimate lipschitz_smoothing_check(const ModelParams& p,
                                            const IntegratorConfig& cfg,
                                            const LipschitzQuery& query,
                                            unsigned workers) {
  if (p.beta() < p.n() + 1) {
    throw std::invalid_argument("lipschitz_smoothing_check: needs beta >= N + 1");
  }
  if (!(query.t > 0.0) || query.start_pairs < 1 || query.directions < 1 ||
      query.paths < 2 || !(query.separation > 0.0)) {
    throw std::invalid_argument("lipschitz_smoothing_check: invalid query");
  }
  cfg.validate();
  const int n = p.n();
  const double margin = std::min(0.1, 0.5 / (n + 1));
  if (query.separation > margin / 2.0) {
    throw std::invalid_argument(
        "lipschitz_smoothing_check: separation too large for the start margin");
  }
  RngStream setup = cfg.seed.substream(cfg.seed.stream_id() ^ 0x5eed1195ULL);

  struct StartPair {
    std::vector<double> x, y;
  };
  std::vector<StartPair> starts;
  std::vector<double> gaps(static_cast<std::size_t>(n) + 1);
  std::vector<double> v(static_cast<std::size_t>(n));
  while (static_cast<int>(starts.size()) < query.start_pairs) {
    auto batch = sample_uniform_simplex(n, setup, 1);
    std::vector<double> x = batch.points.front().coords();
    gaps_of(x, gaps);
    if (*std::min_element(gaps.begin(), gaps.end()) < margin) continue;
    random_unit(setup, v);
    std::vector<double> y(x);
    for (int i = 0; i < n; ++i) y[i] += query.separation * v[i];
    if (!in_closed_simplex(y, 0.0)) continue;
    gaps_of(y, gaps);
    if (*std::min_element(gaps.begin(), gaps.end()) < margin / 2.0) continue;
    starts.push_back({std::move(x), std::move(y)});
  }
  std::vector<std::vector<double>> directions(
      static_cast<std::size_t>(query.directions), std::vector<double>(n));
  for (auto& u : directions) random_unit(setup, u);

  const std::size_t jobs =
      static_cast<std::size_t>(query.start_pairs) * query.paths;
  std::vector<std::vector<double>> displacement(jobs);
  parallel_for(jobs, workers, [&](std::size_t job) {
    const std::size_t pair = job / query.paths;
    IntegratorConfig local = cfg;
    local.seed = cfg.seed.substream(cfg.seed.stream_id() * 1000003ULL + job + 1);
    local.record_stride = std::numeric_limits<std::size_t>::max();
    const auto coupled = simulate_coupled(
        p, local, SimplexPoint(starts[pair].x), SimplexPoint(starts[pair].y),
        Coupling::synchronous, query.t);
    const auto& xa = coupled.a.states.back();
    const auto& xb = coupled.b.states.back();
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) d[i] = xa[i] - xb[i];
    displacement[job] = std::move(d);
  });

  LipschitzEstimate best;
  best.ratio = -1.0;
  for (int s = 0; s < query.start_pairs; ++s) {
    const std::span<const std::vector<double>> rows(
        displacement.data() + static_cast<std::size_t>(s) * query.paths,
        static_cast<std::size_t>(query.paths));
    std::vector<double> diff(n);
    for (int i = 0; i < n; ++i) diff[i] = starts[s].x[i] - starts[s].y[i];
    const double sep = norm(diff);
    for (const auto& u : directions) {
      const auto [ratio, se] = lipschitz_ratio_core(rows, u, sep);
      if (ratio > best.ratio) {
        best.ratio = ratio;
        best.stderr_ = se;
        best.x = starts[s].x;
        best.y = starts[s].y;
        best.direction = u;
      }
    }
  }
  return best;
}

void BallQuery::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("BallQuery: radius must be positive");
  }
  if (mc_budget < 1000) {
    throw std::invalid_argument("BallQuery: mc_budget must be >= 1000");
  }
  if (center.coords.empty()) {
    throw std::invalid_argument("BallQuery: empty center");
  }
}

void sample_in_ball(std::span<const double> center, double radius,
                    RngStream& rng, std::span<double> out) {
  const std::size_t n = center.size();
  random_unit(rng, out);
  const double r = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) out[i] = center[i] + r * out[i];
}

namespace {

struct A2Draws {
  std::vector<double> w;
  std::vector<double> inv;
};

A2Draws draw_a2(const ExtensionParams& ep, const BallQuery& q,
                std::size_t count, RngStream& rng) {
  if (static_cast<int>(q.center.size()) != ep.model().n()) {
    throw std::invalid_argument("BallQuery: center dimension differs from N");
  }
  A2Draws d;
  d.w.reserve(count);
  d.inv.reserve(count);
  std::vector<double> y(q.center.size());
  while (d.w.size() < count) {
    sample_in_ball(q.center.coords, q.radius, rng, y);
    const double lw = log_extended_weight(ep, y);
    // Degenerate points have probability zero; a draw landing exactly on
    // one is redrawn.
    if (!std::isfinite(lw)) continue;
    d.w.push_back(std::exp(lw));
    d.inv.push_back(std::exp(-lw));
  }
  return d;
}

A2Estimate summarize_a2(std::span<const double> w, std::span<const double> inv) {
  const double n = static_cast<double>(w.size());
  A2Estimate est;
  const double mw = std::accumulate(w.begin(), w.end(), 0.0) / n;
  const double mi = std::accumulate(inv.begin(), inv.end(), 0.0) / n;
  double vw = 0.0, vi = 0.0, cov = 0.0, m4 = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double dw = w[k] - mw;
    const double di = inv[k] - mi;
    vw += dw * dw;
    vi += di * di;
    cov += dw * di;
    m4 += di * di * di * di;
  }
  vw /= n - 1;
  vi /= n - 1;
  cov /= n - 1;
  const double m2 = vi * (n - 1) / n;
  est.mean_weight = mw;
  est.mean_inverse = mi;
  est.product = mw * mi;
  const double var_prod = (mi * mi * vw + mw * mw * vi + 2.0 * mw * mi * cov) / n;
  est.stderr_ = std::sqrt(std::max(0.0, var_prod));
  est.kurtosis_inverse = m2 > 0.0 ? (m4 / n) / (m2 * m2) : 0.0;
  est.heavy_tail = est.kurtosis_inverse > kHeavyTailKurtosis;
  return est;
}

}  // namespace

A2Estimate a2_product_mc(const ExtensionParams& ep, const BallQuery& q,
                         RngStream& rng) {
  q.validate();
  const auto d = draw_a2(ep, q, q.mc_budget, rng);
  return summarize_a2(d.w, d.inv);
}

A2DivergenceProbe a2_divergence_probe(const ExtensionParams& ep,
                                      const BallQuery& q, RngStream& rng,
                                      int doublings) {
  q.validate();
  if (doublings < 1) {
    throw std::invalid_argument("a2_divergence_probe: doublings must be >= 1");
  }
  const std::size_t total = q.mc_budget << doublings;
  const auto d = draw_a2(ep, q, total, rng);
  A2DivergenceProbe probe;
  A2Estimate last;
  for (int k = 0; k <= doublings; ++k) {
    const std::size_t m = q.mc_budget << k;
    last = summarize_a2(std::span(d.w).first(m), std::span(d.inv).first(m));
    probe.budgets.push_back(m);
    probe.estimates.push_back(last.product);
  }
  probe.heavy_tail = last.heavy_tail;
  probe.divergent = probe.heavy_tail &&
                    probe.estimates.back() >= kDivergenceGrowth * probe.estimates.front();
  return probe;
}

double a2_interval_analytic(double exponent, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("a2_interval_analytic: r must be > 0");
  if (!(std::abs(exponent) < 1.0)) return kInf;
  return 1.0 / ((1.0 + exponent) * (1.0 - exponent));
}

double ball_mass_radius_bound(const ExtensionParams& ep,
                              std::span<const double> y, double tie_tolerance) {
  const auto t = fold_T(y);
  double least = kInf;
  double prev = 0.0;
  for (double v : t) {
    const double g = v - prev;
    if (g > tie_tolerance) least = std::min(least, g);
    prev = v;
  }
  return std::min(least, ep.delta()) / 4.0;
}

MassScaling ball_mass_exponent(const ExtensionParams& ep,
                               std::span<const double> y,
                               std::span<const double> radii,
                               std::size_t mc_budget, RngStream& rng,
                               double tie_tolerance) {
  const int n = ep.model().n();
  if (static_cast<int>(y.size()) != n) {
    throw std::invalid_argument("ball_mass_exponent: point dimension differs from N");
  }
  if (radii.size() < 3) {
    throw std::invalid_argument("ball_mass_exponent: need at least 3 radii");
  }
  if (mc_budget < 2) {
    throw std::invalid_argument("ball_mass_exponent: mc_budget must be >= 2");
  }
  const double bound = ball_mass_radius_bound(ep, y, tie_tolerance);
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] > 0.0) || !(radii[k] < bound)) {
      throw std::invalid_argument(
          "ball_mass_exponent: radius " + std::to_string(radii[k]) +
          " outside (0, " + std::to_string(bound) + ")");
    }
    if (k > 0 && !(radii[k] < radii[k - 1])) {
      throw std::invalid_argument("ball_mass_exponent: radii must decrease");
    }
  }
  const double volume = std::pow(std::numbers::pi, n / 2.0) /
                        std::tgamma(n / 2.0 + 1.0);
  const std::size_t m = radii.size();
  std::vector<double> sum(m, 0.0), sum_sq(m, 0.0);
  std::vector<double> unit(static_cast<std::size_t>(n)), z(unit.size());
  const std::vector<double> origin(unit.size(), 0.0);
  for (std::size_t s = 0; s < mc_budget; ++s) {
    sample_in_ball(origin, 1.0, rng, unit);
    for (std::size_t k = 0; k < m; ++k) {
      for (int i = 0; i < n; ++i) z[i] = y[i] + radii[k] * unit[i];
      const double w = extended_weight(ep, z);
      sum[k] += w;
      sum_sq[k] += w * w;
    }
  }
  MassScaling out;
  out.radii.assign(radii.begin(), radii.end());
  std::vector<double> lr(m), lm(m);
  for (std::size_t k = 0; k < m; ++k) {
    const double mean = sum[k] / mc_budget;
    const double var =
        std::max(0.0, (sum_sq[k] - mc_budget * mean * mean) / (mc_budget - 1));
    const double vol = volume * std::pow(radii[k], n);
    out.masses.push_back(vol * mean);
    out.mass_stderr.push_back(vol * std::sqrt(var / mc_budget));
    lr[k] = std::log(radii[k]);
    lm[k] = std::log(out.masses.back());
  }
  const auto fit = least_squares(lr, lm);
  out.slope = fit.slope;
  out.stderr_ = fit.slope_stderr;
  return out;
}

RegularityReport wiener_classify(const ExtensionParams& ep,
                                 std::span<const double> z,
                                 double tie_tolerance) {
  RegularityReport rep;
  rep.point.coords.assign(z.begin(), z.end());
  rep.h = scaling_exponent_h(ep.model(), z, tie_tolerance);
  rep.h_prime = 1.0 - rep.h;
  rep.branch = rep.h_prime > -1.0 ? WienerBranch::a : WienerBranch::b;
  rep.regular = true;
  return rep;
}

double capacity_asymptotic(const ExtensionParams& ep,
                           std::span<const double> y, double r, double R0,
                           double tie_tolerance) {
  if (!(r > 0.0) || !(r < R0)) {
    throw std::invalid_argument("capacity_asymptotic: need 0 < r < R0");
  }
  const double bound = ball_mass_radius_bound(ep, y, tie_tolerance);
  if (!(R0 < bound)) {
    throw std::invalid_argument("capacity_asymptotic: R0 " + std::to_string(R0) +
                                " not below the validity bound " +
                                std::to_string(bound));
  }
  const double hp = 1.0 - scaling_exponent_h(ep.model(), y, tie_tolerance);
  if (std::abs(hp + 1.0) < 1e-12) return 1.0 / (std::log(R0) - std::log(r));
  return (hp + 1.0) / (std::pow(R0, hp + 1.0) - std::pow(r, hp + 1.0));
}

bool semimartingale_classify(const ModelParams& p) {
  return p.beta_prime() >= 1.0;
}

namespace {

// int_a^b s^e ds for 0 <= a < b.
double power_integral(double a, double b, double e) {
  if (e == -1.0) return a == 0.0 ? kInf : std::log(b / a);
  if (e < -1.0 && a == 0.0) return kInf;
  return (std::pow(b, e + 1.0) - std::pow(a, e + 1.0)) / (e + 1.0);
}

}  // namespace

NuMass nu_mass(const ModelParams& p, int i, double eps) {
  const int n = p.n();
  if (i < 1 || i > n) throw std::invalid_argument("nu_mass: need 1 <= i <= N");
  if (!(eps > 0.0) || !(eps < 1.0 / (2.0 * (n + 2)))) {
    throw std::invalid_argument("nu_mass: need 0 < eps < 1/(2(N+2))");
  }
  const double bp = p.beta_prime();
  // Gaps are numbered 1..N+1. The singular gap s = i+1 ranges over [0, eps],
  // its partner g_i and every other free gap over [eps, 2 eps]; the one
  // remaining gap is fixed by the constraint and frozen at its box-centre
  // value.
  const int s = i + 1;
  const int partner = i;
  const int bulk = n == 1 ? partner : (s != n + 1 ? n + 1 : 1);
  const double centre_free = 1.5 * eps * (n - 1) + 0.5 * eps;
  const double g_bulk = 1.0 - centre_free;

  NuMass out;
  out.singular_factor = power_integral(0.0, eps, bp - 2.0);
  const double prefactor = std::abs(1.0 - bp) * std::exp(-p.log_normalizer());
  if (prefactor == 0.0) return out;

  double others = 1.0;
  for (int g = 1; g <= n + 1; ++g) {
    if (g == s || g == partner || g == bulk) continue;
    others *= power_integral(eps, 2.0 * eps, bp - 1.0);
  }
  const double bulk_weight = std::pow(g_bulk, bp - 1.0);

  // nu_1: density g_s^{beta'-2} g_partner^{beta'-1} prod_rest g^{beta'-1}.
  // nu_2: density g_s^{beta'-1} g_partner^{beta'-2} prod_rest g^{beta'-1}.
  double nu1 = prefactor * out.singular_factor * others;
  double nu2 = prefactor * power_integral(0.0, eps, bp - 1.0) * others;
  if (partner == bulk) {
    nu1 *= bulk_weight;
    nu2 *= std::pow(g_bulk, bp - 2.0);
  } else {
    nu1 *= power_integral(eps, 2.0 * eps, bp - 1.0) * bulk_weight;
    nu2 *= power_integral(eps, 2.0 * eps, bp - 2.0) * bulk_weight;
  }
  out.nu1 = nu1;
  out.nu2 = nu2;
  return out;
}

namespace {

constexpr double kFdStep = 1e-6;

void gradient_of(const std::function<double(std::span<const double>)>& f,
                 const std::function<void(std::span<const double>, std::span<double>)>& grad,
                 std::span<const double> x, std::span<double> out,
                 std::vector<double>& scratch) {
  if (grad) {
    grad(x, out);
    return;
  }
  scratch.assign(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    scratch[i] = x[i] + kFdStep;
    const double up = f(scratch);
    scratch[i] = x[i] - kFdStep;
    const double down = f(scratch);
    scratch[i] = x[i];
    out[i] = (up - down) / (2.0 * kFdStep);
  }
}

}  // namespace

IbpResidual ibp_residual(const ModelParams& p, const ScalarFunction& u,
                         const TestVectorField& tvf,
                         std::span<const SimplexPoint> samples) {
  if (!u.value) throw std::invalid_argument("ibp_residual: u has no value");
  tvf.validate();
  if (samples.empty()) throw std::invalid_argument("ibp_residual: no samples");
  const std::size_t n = static_cast<std::size_t>(p.n());
  std::vector<double> gu(n), gw(n), phi(n), scratch;
  IbpResidual res;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const auto& pt : samples) {
    if (pt.size() != n) {
      throw std::invalid_argument("ibp_residual: sample dimension differs from N");
    }
    double v;
    try {
      v = ibp_functional(p, pt, tvf);
    } catch (const DomainError&) {
      ++res.rejected;
      continue;
    }
    gradient_of(u.value, u.gradient, pt, gu, scratch);
    gradient_of(tvf.weight, tvf.weight_gradient, pt, gw, scratch);
    const double w = tvf.weight(pt);
    const double uv = u.value(pt);
    double a = 0.0;
    double b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      phi[i] = tvf.profile(pt[i]);
      a += gu[i] * w * phi[i];
      b += gw[i] * phi[i];
    }
    const double term = a + uv * (w * v + b);
    if (!std::isfinite(term)) {
      ++res.rejected;
      continue;
    }
    ++res.accepted;
    sum += term;
    sum_sq += term * term;
  }
  if (res.rejection_rate() > kMaxIbpRejectionRate) {
    throw EstimatorError("ibp_residual: rejection rate " +
                         std::to_string(res.rejection_rate()) + " exceeds 0.1%");
  }
  if (res.accepted < 2) throw EstimatorError("ibp_residual: too few samples");
  const double m = static_cast<double>(res.accepted);
  res.estimate = sum / m;
  res.stderr_ = std::sqrt(std::max(0.0, (sum_sq - m * res.estimate * res.estimate) /
                                            (m - 1) / m));
  return res;
}

std::vector<IbpCase> standard_ibp_battery() {
  using std::numbers::pi;
  auto sum = [](std::span<const double> x) {
    return std::accumulate(x.begin(), x.end(), 0.0);
  };
  auto one = [](std::span<const double>) { return 1.0; };
  auto zero_grad = [](std::span<const double>, std::span<double> g) {
    std::fill(g.begin(), g.end(), 0.0);
  };
  auto bump = [](double y) { return y * (1.0 - y); };
  auto bump_d = [](double y) { return 1.0 - 2.0 * y; };

  std::vector<IbpCase> cases;
  cases.push_back({"constant", {one, zero_grad}, {one, zero_grad, bump, bump_d}});
  cases.push_back({"linear_sine",
                   {sum,
                    [](std::span<const double>, std::span<double> g) {
                      std::fill(g.begin(), g.end(), 1.0);
                    }},
                   {one, zero_grad, [](double y) { return std::sin(pi * y); },
                    [](double y) { return pi * std::cos(pi * y); }}});
  cases.push_back(
      {"mixed_weighted",
       {[](std::span<const double> x) {
          return x.front() * x.front() + std::cos(x.back());
        },
        {}},
       {[](std::span<const double> x) { return 1.0 + x.front(); }, {}, bump,
        bump_d}});
  cases.push_back(
      {"exponential",
       {[sum](std::span<const double> x) { return std::exp(-sum(x)); },
        [sum](std::span<const double> x, std::span<double> g) {
          std::fill(g.begin(), g.end(), -std::exp(-sum(x)));
        }},
       {[](std::span<const double> x) {
          double s = 1.0;
          for (double v : x) s += v * v;
          return s;
        },
        [](std::span<const double> x, std::span<double> g) {
          for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * x[i];
        },
        [](double y) { return std::sin(2.0 * pi * y); },
        [](double y) { return 2.0 * pi * std::cos(2.0 * pi * y); }}});
  cases.push_back(
      {"oscillating",
       {[](std::span<const double> x) { return std::sin(3.0 * x.front()); }, {}},
       {[](std::span<const double> x) { return std::exp(x.back()); }, {},
        [](double y) { return y * y * (1.0 - y); },
        [](double y) { return 2.0 * y - 3.0 * y * y; }}});
  return cases;
}

std::vector<double> geometric_radii(double top, std::size_t count,
                                    double ratio) {
  if (!(top > 0.0) || !(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("geometric_radii: need top > 0, 0 < ratio < 1");
  }
  std::vector<double> radii(count);
  double r = top;
  for (auto& v : radii) {
    v = r;
    r *= ratio;
  }
  return radii;
}

A2Survey a2_random_ball_survey(const ExtensionParams& ep,
                               const A2SurveyQuery& q, std::uint64_t seed,
                               unsigned workers) {
  if (q.balls < 3 || !(q.r_min > 0.0) || !(q.r_max >= q.r_min) ||
      !(q.box > 0.0)) {
    throw std::invalid_argument("a2_random_ball_survey: invalid query");
  }
  const int n = ep.model().n();
  A2Survey out;
  out.balls.resize(q.balls);
  out.estimates.resize(q.balls);
  const double log_lo = std::log(q.r_min);
  const double log_hi = std::log(q.r_max);
  parallel_for(q.balls, workers, [&](std::size_t k) {
    RngStream rng(seed, k);
    BallQuery ball;
    ball.center.coords.resize(static_cast<std::size_t>(n));
    for (auto& c : ball.center.coords) c = q.box * (2.0 * rng.uniform() - 1.0);
    ball.radius = std::exp(log_lo + (log_hi - log_lo) * rng.uniform());
    ball.mc_budget = q.mc_budget;
    out.estimates[k] = a2_product_mc(ep, ball, rng);
    out.balls[k] = std::move(ball);
  });
  std::vector<double> lr(q.balls), lp(q.balls);
  for (std::size_t k = 0; k < q.balls; ++k) {
    out.max_product = std::max(out.max_product, out.estimates[k].product);
    if (out.estimates[k].heavy_tail) ++out.heavy_tail_count;
    lr[k] = std::log(out.balls[k].radius);
    lp[k] = std::log(out.estimates[k].product);
  }
  const auto fit = least_squares(lr, lp);
  out.radius_slope = fit.slope;
  out.radius_slope_stderr = fit.slope_stderr;
  return out;
}

std::string to_string(FvVerdict v) {
  switch (v) {
    case FvVerdict::stabilizes:
      return "stabilizes";
    case FvVerdict::grows:
      return "grows";
    default:
      return "inconclusive";
  }
}

FvLadder fv_refinement_ladder(const ModelParams& p, std::span<const double> dts,
                              std::size_t paths, double t_end,
                              std::uint64_t seed,
                              const LevelConfig& level_config,
                              unsigned workers) {
  if (dts.size() < 2 || paths < 2 || !(t_end > 0.0)) {
    throw std::invalid_argument(
        "fv_refinement_ladder: need two levels, two paths and t_end > 0");
  }
  const std::size_t n = static_cast<std::size_t>(p.n());
  std::vector<SimplexPoint> starts;
  starts.reserve(paths);
  std::vector<double> x(n);
  for (std::size_t k = 0; k < paths; ++k) {
    RngStream rng(seed, k);
    draw_invariant(p, rng, x);
    starts.push_back(SimplexPoint::trusted(x));
  }
  FvLadder ladder;
  for (std::size_t l = 0; l < dts.size(); ++l) {
    IntegratorConfig cfg =
        level_config ? level_config(dts[l])
                     : IntegratorConfig::with_defaults(dts[l], RngStream(seed, 0));
    cfg.record_stride = std::numeric_limits<std::size_t>::max();
    cfg.validate();
    std::vector<double> fv(paths);
    std::vector<double> hits(paths);
    parallel_for(paths, workers, [&](std::size_t k) {
      IntegratorConfig local = cfg;
      local.seed = RngStream(seed, ((l + 1) << 32) + k);
      const auto traj = simulate(p, local, starts[k], t_end);
      fv[k] = fv_variation(traj);
      hits[k] = static_cast<double>(
          std::accumulate(traj.cap_hits.begin(), traj.cap_hits.end(),
                          std::uint64_t{0}));
    });
    FvLevel level;
    level.dt = dts[l];
    const double m = static_cast<double>(paths);
    level.mean = std::accumulate(fv.begin(), fv.end(), 0.0) / m;
    double ss = 0.0;
    for (double v : fv) ss += (v - level.mean) * (v - level.mean);
    level.stderr_ = std::sqrt(ss / (m - 1) / m);
    level.mean_cap_hits = std::accumulate(hits.begin(), hits.end(), 0.0) / m;
    ladder.levels.push_back(level);
  }
  bool stable = true;
  bool grows = true;
  for (std::size_t l = 1; l < ladder.levels.size(); ++l) {
    const double r = ladder.levels[l].mean / ladder.levels[l - 1].mean;
    ladder.ratios.push_back(r);
    stable = stable && r >= kFvStableLow && r <= kFvStableHigh;
    grows = grows && r >= kFvGrowth;
  }
  ladder.verdict = stable ? FvVerdict::stabilizes
                          : (grows ? FvVerdict::grows : FvVerdict::inconclusive);
  return ladder;
}

}  // namespace simplexbessel
