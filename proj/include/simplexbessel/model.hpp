#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace simplexbessel {

/// Raised when an operation needs a strictly interior configuration and a
/// gap vanishes. `gap_index()` is 1-based in the N+1 gap convention.
class DomainError : public std::domain_error {
 public:
  DomainError(const std::string& what, std::size_t gap_index)
      : std::domain_error(what), gap_index_(gap_index) {}
  std::size_t gap_index() const noexcept { return gap_index_; }

 private:
  std::size_t gap_index_;
};

/// Default absolute slack for simplex-membership checks.
inline constexpr double kSimplexTolerance =
    4.0 * std::numeric_limits<double>::epsilon();

/// Number of particles N, inverse temperature beta and the derived gap
/// exponent beta' = beta / (N + 1).
class ModelParams {
 public:
  ModelParams(int n_particles, double beta);

  int n() const noexcept { return n_; }
  double beta() const noexcept { return beta_; }
  double beta_prime() const noexcept { return beta_prime_; }

  /// log Z_beta = (N+1) log Gamma(beta') - log Gamma(beta).
  double log_normalizer() const noexcept { return log_z_; }

 private:
  int n_;
  double beta_;
  double beta_prime_;
  double log_z_;
};

/// Ordered configuration 0 <= x^1 <= ... <= x^N <= 1.
class SimplexPoint {
 public:
  explicit SimplexPoint(std::vector<double> coords,
                        double tolerance = kSimplexTolerance);

  /// Skips validation. For integrator internals that keep the invariant by
  /// construction.
  static SimplexPoint trusted(std::vector<double> coords);

  std::size_t size() const noexcept { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  const std::vector<double>& coords() const noexcept { return coords_; }
  operator std::span<const double>() const noexcept { return coords_; }

  friend bool operator==(const SimplexPoint&, const SimplexPoint&) = default;

 private:
  SimplexPoint() = default;
  std::vector<double> coords_;
};

bool in_closed_simplex(std::span<const double> x,
                       double tolerance = kSimplexTolerance);
bool in_open_simplex(std::span<const double> x);

/// The N+1 spacings g_i = x^i - x^{i-1} with x^0 = 0 and x^{N+1} = 1.
class GapVector {
 public:
  explicit GapVector(std::vector<double> gaps,
                     double tolerance = kSimplexTolerance);
  static GapVector from_point(std::span<const double> x);

  std::size_t size() const noexcept { return gaps_.size(); }
  double operator[](std::size_t i) const { return gaps_[i]; }
  const std::vector<double>& gaps() const noexcept { return gaps_; }

  /// Cumulative sums of the first N gaps.
  SimplexPoint to_point() const;

 private:
  GapVector() = default;
  std::vector<double> gaps_;
};

/// Fills `out` (size N+1) with the gaps of x.
void gaps_of(std::span<const double> x, std::span<double> out);

/// Vector field xi = w * (phi(x^1), ..., phi(x^N)) used in the integration
/// by parts identity. `weight_gradient` may be left empty, in which case
/// central differences are used.
struct TestVectorField {
  using ScalarField = std::function<double(std::span<const double>)>;
  using GradientField =
      std::function<void(std::span<const double>, std::span<double>)>;

  ScalarField weight;
  GradientField weight_gradient;
  std::function<double(double)> profile;
  std::function<double(double)> profile_derivative;

  /// Throws std::invalid_argument unless |phi(0)|, |phi(1)| <= 1e-12.
  void validate() const;
};

/// Natural log of the invariant density q_N. Boundary points give
/// -(beta'-1) * inf, i.e. +inf for beta' < 1 and -inf for beta' > 1;
/// points outside the closed simplex give -inf.
double log_density(const ModelParams& p, std::span<const double> x);

/// (beta'-1)(1/g_i - 1/g_{i+1}), the gradient of log q_N.
std::vector<double> drift(const ModelParams& p, std::span<const double> x);
void drift_into(const ModelParams& p, std::span<const double> x,
                std::span<double> out);

/// V(x) = -sum log g_i, +inf unless every gap is positive.
double potential_V(std::span<const double> x);

/// <xi, Hess V(x) xi> = sum_i (xi_i - xi_{i-1})^2 / g_i^2 with xi_0 = xi_{N+1} = 0.
double hessian_quadratic_form(std::span<const double> x,
                              std::span<const double> xi);

/// V^beta_{N,phi}(x).
double ibp_functional(const ModelParams& p, std::span<const double> x,
                      const TestVectorField& tvf);

}  // namespace simplexbessel
