#pragma once

#include <span>
#include <vector>

#include "simplexbessel/model.hpp"

namespace simplexbessel {

/// Model parameters plus the cut-off delta of the extended weight. The
/// region Omega_N = {x in closed simplex : x^N <= 1 - delta}.
class ExtensionParams {
 public:
  ExtensionParams(ModelParams model, double delta);

  const ModelParams& model() const noexcept { return model_; }
  double delta() const noexcept { return delta_; }

  /// Exclusive upper bound 1 / (2 (N + 2)) on delta.
  static double max_delta(int n) { return 1.0 / (2.0 * (n + 2)); }

 private:
  ModelParams model_;
  double delta_;
};

/// Unconstrained point of R^N.
struct AmbientPoint {
  std::vector<double> coords;

  std::size_t size() const noexcept { return coords.size(); }
  operator std::span<const double>() const noexcept { return coords; }
};

/// T(y): absolute values sorted ascending. The result lies in the cone
/// 0 <= t^1 <= ... <= t^N and is not clamped to [0, 1].
std::vector<double> fold_T(std::span<const double> y);
void fold_T_into(std::span<const double> y, std::span<double> out);

/// H_i(x) = (x^1, ..., x^i, 1 - (x^N - x^i), ..., 1 - (x^{i+1} - x^i)),
/// for 0 <= i <= N. Involutive; H_N is the identity.
SimplexPoint reflect_H(int i, const SimplexPoint& x);

/// log of the extended weight q-hat at y, evaluated on T(y). May be +inf at
/// degenerate points when beta' < 1 and -inf when beta' > 1.
double log_extended_weight(const ExtensionParams& ep, std::span<const double> y);
double extended_weight(const ExtensionParams& ep, std::span<const double> y);

/// Number of i in 1..N with t^i - t^{i-1} <= tie_tolerance, t = T(y), t^0 = 0.
int degeneracy_d(std::span<const double> y, double tie_tolerance = 0.0);

/// h(y) = N - d(y) + beta' d(y).
double scaling_exponent_h(const ModelParams& p, std::span<const double> y,
                          double tie_tolerance = 0.0);

}  // namespace simplexbessel
