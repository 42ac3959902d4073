#include "simplexbessel/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace simplexbessel {

ExtensionParams::ExtensionParams(ModelParams model, double delta)
    : model_(model), delta_(delta) {
  if (!(delta > 0.0) || !(delta < max_delta(model.n()))) {
    throw std::invalid_argument(
        "ExtensionParams: delta must lie in (0, 1/(2(N+2)))");
  }
}

void fold_T_into(std::span<const double> y, std::span<double> out) {
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = std::abs(y[i]);
  // Ties carry equal values, so the permutation choice cannot change the
  // result; insertion sort keeps it stable and is fastest for small N.
  for (std::size_t i = 1; i < out.size(); ++i) {
    const double v = out[i];
    std::size_t j = i;
    while (j > 0 && out[j - 1] > v) {
      out[j] = out[j - 1];
      --j;
    }
    out[j] = v;
  }
}

std::vector<double> fold_T(std::span<const double> y) {
  std::vector<double> out(y.size());
  fold_T_into(y, out);
  return out;
}

SimplexPoint reflect_H(int i, const SimplexPoint& x) {
  const int n = static_cast<int>(x.size());
  if (i < 0 || i > n) {
    throw std::out_of_range("reflect_H: index must lie in 0..N");
  }
  std::vector<double> out(x.coords());
  const double anchor = i == 0 ? 0.0 : x[i - 1];
  for (int k = i; k < n; ++k) {
    // Position k (0-based) takes 1 - (x^{N-(k-i)} - x^i).
    out[k] = 1.0 - (x[n - 1 - (k - i)] - anchor);
  }
  return SimplexPoint::trusted(std::move(out));
}

double log_extended_weight(const ExtensionParams& ep,
                           std::span<const double> y) {
  const ModelParams& p = ep.model();
  const std::size_t n = y.size();
  double buf[64] = {};
  std::vector<double> heap;
  std::span<double> t;
  if (n <= 64) {
    t = std::span<double>(buf, n);
  } else {
    heap.resize(n);
    t = heap;
  }
  fold_T_into(y, t);

  const double exponent = p.beta_prime() - 1.0;
  const bool inner = t[n - 1] <= 1.0 - ep.delta();
  double sum_log = 0.0;
  bool degenerate = false;
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = t[i] - prev;
    if (g > 0.0) {
      sum_log += std::log(g);
    } else {
      degenerate = true;
    }
    prev = t[i];
  }
  // Top factor: the last gap inside Omega_N, delta on the outer branch.
  sum_log += inner ? std::log(1.0 - t[n - 1]) : std::log(ep.delta());
  if (degenerate && exponent != 0.0) {
    return exponent > 0.0 ? -std::numeric_limits<double>::infinity()
                          : std::numeric_limits<double>::infinity();
  }
  return -p.log_normalizer() + exponent * sum_log;
}

double extended_weight(const ExtensionParams& ep, std::span<const double> y) {
  return std::exp(log_extended_weight(ep, y));
}

int degeneracy_d(std::span<const double> y, double tie_tolerance) {
  const std::vector<double> t = fold_T(y);
  int d = 0;
  double prev = 0.0;
  for (double v : t) {
    if (v - prev <= tie_tolerance) ++d;
    prev = v;
  }
  return d;
}

double scaling_exponent_h(const ModelParams& p, std::span<const double> y,
                          double tie_tolerance) {
  const int d = degeneracy_d(y, tie_tolerance);
  return static_cast<double>(p.n() - d) + p.beta_prime() * d;
}

}  // namespace simplexbessel
