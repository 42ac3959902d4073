#include "simplexbessel/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace simplexbessel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

[[noreturn]] void throw_zero_gap(const char* op, std::size_t gap_index) {
  std::ostringstream msg;
  msg << op << ": gap " << gap_index << " vanishes";
  throw DomainError(msg.str(), gap_index);
}

// Gaps, throwing on the first non-positive one.
void interior_gaps(const char* op, std::span<const double> x,
                   std::span<double> gaps) {
  gaps_of(x, gaps);
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    if (!(gaps[i] > 0.0)) throw_zero_gap(op, i + 1);
  }
}

}  // namespace

ModelParams::ModelParams(int n_particles, double beta)
    : n_(n_particles), beta_(beta) {
  if (n_particles < 1) {
    throw std::invalid_argument("ModelParams: n_particles must be >= 1");
  }
  if (!(beta > 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument("ModelParams: beta must be a positive real");
  }
  beta_prime_ = beta_ / static_cast<double>(n_ + 1);
  log_z_ = static_cast<double>(n_ + 1) * std::lgamma(beta_prime_) -
           std::lgamma(beta_);
}

SimplexPoint::SimplexPoint(std::vector<double> coords, double tolerance)
    : coords_(std::move(coords)) {
  if (coords_.empty()) {
    throw std::invalid_argument("SimplexPoint: empty configuration");
  }
  if (!in_closed_simplex(coords_, tolerance)) {
    throw std::invalid_argument(
        "SimplexPoint: coordinates are not ordered within [0, 1]");
  }
}

SimplexPoint SimplexPoint::trusted(std::vector<double> coords) {
  SimplexPoint p;
  p.coords_ = std::move(coords);
  return p;
}

bool in_closed_simplex(std::span<const double> x, double tolerance) {
  double prev = 0.0;
  for (double v : x) {
    if (!std::isfinite(v) || v < prev - tolerance) return false;
    prev = v;
  }
  return prev <= 1.0 + tolerance;
}

bool in_open_simplex(std::span<const double> x) {
  double prev = 0.0;
  for (double v : x) {
    if (!(v > prev)) return false;
    prev = v;
  }
  return prev < 1.0;
}

void gaps_of(std::span<const double> x, std::span<double> out) {
  double prev = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = x[i] - prev;
    prev = x[i];
  }
  out[x.size()] = 1.0 - prev;
}

GapVector::GapVector(std::vector<double> gaps, double tolerance)
    : gaps_(std::move(gaps)) {
  if (gaps_.size() < 2) {
    throw std::invalid_argument("GapVector: need at least two gaps");
  }
  double sum = 0.0;
  for (double g : gaps_) {
    if (!(g >= 0.0)) {
      throw std::invalid_argument("GapVector: negative gap");
    }
    sum += g;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    throw std::invalid_argument("GapVector: gaps do not sum to one");
  }
}

GapVector GapVector::from_point(std::span<const double> x) {
  GapVector g;
  g.gaps_.resize(x.size() + 1);
  gaps_of(x, g.gaps_);
  return g;
}

SimplexPoint GapVector::to_point() const {
  std::vector<double> coords(gaps_.size() - 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    acc += gaps_[i];
    coords[i] = std::min(acc, 1.0);
  }
  return SimplexPoint::trusted(std::move(coords));
}

void TestVectorField::validate() const {
  if (!weight || !profile || !profile_derivative) {
    throw std::invalid_argument("TestVectorField: missing component");
  }
  if (std::abs(profile(0.0)) > 1e-12 || std::abs(profile(1.0)) > 1e-12) {
    throw std::invalid_argument(
        "TestVectorField: profile must vanish at 0 and 1");
  }
}

double log_density(const ModelParams& p, std::span<const double> x) {
  if (!in_closed_simplex(x)) return -kInf;
  const double exponent = p.beta_prime() - 1.0;
  double sum_log = 0.0;
  double prev = 0.0;
  bool on_boundary = false;
  for (std::size_t i = 0; i <= x.size(); ++i) {
    const double next = i < x.size() ? x[i] : 1.0;
    const double g = next - prev;
    if (g <= 0.0) {
      on_boundary = true;
    } else {
      sum_log += std::log(g);
    }
    prev = next;
  }
  if (on_boundary && exponent != 0.0) {
    return exponent > 0.0 ? -kInf : kInf;
  }
  return -p.log_normalizer() + exponent * sum_log;
}

void drift_into(const ModelParams& p, std::span<const double> x,
                std::span<double> out) {
  const std::size_t n = x.size();
  double prev = 0.0;
  double g_prev = x[0];
  if (!(g_prev > 0.0)) throw_zero_gap("drift", 1);
  const double c = p.beta_prime() - 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    prev = x[i];
    const double next = i + 1 < n ? x[i + 1] : 1.0;
    const double g_next = next - prev;
    if (!(g_next > 0.0)) throw_zero_gap("drift", i + 2);
    out[i] = c * (1.0 / g_prev - 1.0 / g_next);
    g_prev = g_next;
  }
}

std::vector<double> drift(const ModelParams& p, std::span<const double> x) {
  std::vector<double> out(x.size());
  drift_into(p, x, out);
  return out;
}

double potential_V(std::span<const double> x) {
  double v = 0.0;
  double prev = 0.0;
  for (std::size_t i = 0; i <= x.size(); ++i) {
    const double next = i < x.size() ? x[i] : 1.0;
    const double g = next - prev;
    if (!(g > 0.0) || !std::isfinite(g)) return kInf;
    v -= std::log(g);
    prev = next;
  }
  return v;
}

double hessian_quadratic_form(std::span<const double> x,
                              std::span<const double> xi) {
  if (xi.size() != x.size()) {
    throw std::invalid_argument("hessian_quadratic_form: size mismatch");
  }
  std::vector<double> g(x.size() + 1);
  interior_gaps("hessian_quadratic_form", x, g);
  double acc = 0.0;
  double xi_prev = 0.0;
  for (std::size_t i = 0; i <= x.size(); ++i) {
    const double xi_i = i < x.size() ? xi[i] : 0.0;
    const double d = xi_i - xi_prev;
    acc += d * d / (g[i] * g[i]);
    xi_prev = xi_i;
  }
  return acc;
}

double ibp_functional(const ModelParams& p, std::span<const double> x,
                      const TestVectorField& tvf) {
  std::vector<double> g(x.size() + 1);
  interior_gaps("ibp_functional", x, g);
  double quotients = 0.0;
  double derivs = 0.0;
  double phi_prev = tvf.profile(0.0);
  for (std::size_t i = 0; i <= x.size(); ++i) {
    const double phi_next = tvf.profile(i < x.size() ? x[i] : 1.0);
    quotients += (phi_next - phi_prev) / g[i];
    phi_prev = phi_next;
    if (i < x.size()) derivs += tvf.profile_derivative(x[i]);
  }
  return (p.beta_prime() - 1.0) * quotients + derivs;
}

}  // namespace simplexbessel
