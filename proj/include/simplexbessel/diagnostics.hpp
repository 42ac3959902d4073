#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simplexbessel/dynamics.hpp"
#include "simplexbessel/model.hpp"
#include "simplexbessel/rng.hpp"
#include "simplexbessel/sampler.hpp"
#include "simplexbessel/symmetry.hpp"

namespace simplexbessel {

/// An estimator could not produce a value (degenerate fit window, too many
/// rejected samples, ...).
class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Contraction

/// Smallest eigenvalue of the n x n matrix with 2 on the diagonal and -1 on
/// the first off-diagonals (symmetric eigensolver).
double k_constant(int n);

/// (beta' - 1) k_N. Non-positive when beta < N + 1, where no contraction is
/// guaranteed.
double contraction_rate(const ModelParams& p);

/// Distances of many coupled pairs on one recorded grid. rows[j][k] is the
/// distance of pair j at times[k].
struct DistanceTable {
  std::vector<double> times;
  std::vector<std::vector<double>> rows;
};

struct RateFit {
  std::vector<double> times;
  std::vector<double> mean_distances;
  double fitted_rate = 0.0;
  double stderr_ = 0.0;
  /// Number of leading grid points used by the fit.
  std::size_t window = 0;
};

/// Least-squares slope of -log(mean distance) against t over the leading
/// run of grid points where the mean exceeds 10 merge_tol. stderr from a
/// path-level bootstrap.
RateFit fit_decay(const DistanceTable& table, double merge_tol,
                  RngStream bootstrap_rng, int resamples = 200);
RateFit fit_decay(std::span<const CoupledPair> pairs, double merge_tol,
                  RngStream bootstrap_rng, int resamples = 200);

struct LipschitzQuery {
  double t = 1.0;
  int start_pairs = 10;
  int directions = 10;
  int paths = 1000;
  /// Separation |x - y| of the start pairs.
  double separation = 0.05;
};

struct LipschitzEstimate {
  double ratio = 0.0;
  double stderr_ = 0.0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> direction;
};

/// |mean <u, d_k>| / separation with d_k the per-path displacements
/// X^x_t - X^y_t. Returns (ratio, stderr).
std::pair<double, double> lipschitz_ratio_core(
    std::span<const std::vector<double>> displacements,
    std::span<const double> u, double separation);

/// Worst ratio |P_t f(x) - P_t f(y)| / |x - y| over linear f(z) = <u, z>
/// with |u| = 1, random start pairs and random directions. Paths of a pair
/// share their noise (synchronous coupling). Requires beta >= N + 1.
LipschitzEstimate lipschitz_smoothing_check(const ModelParams& p,
                                            const IntegratorConfig& cfg,
                                            const LipschitzQuery& query,
                                            unsigned workers = 1);

// ---------------------------------------------------------------------------
// Muckenhoupt weights and local scaling

struct BallQuery {
  AmbientPoint center;
  double radius = 1.0;
  std::size_t mc_budget = 1000;

  void validate() const;
};

/// Uniform point in the ball: Gaussian direction scaled by r U^{1/N}.
void sample_in_ball(std::span<const double> center, double radius,
                    RngStream& rng, std::span<double> out);

inline constexpr double kHeavyTailKurtosis = 100.0;

struct A2Estimate {
  double product = 0.0;
  double stderr_ = 0.0;
  double mean_weight = 0.0;
  double mean_inverse = 0.0;
  /// Sample kurtosis (non-excess) of the inverse-weight draws.
  double kurtosis_inverse = 0.0;
  bool heavy_tail = false;
};

/// (avg of q-hat)(avg of 1/q-hat) over the ball by uniform sampling.
A2Estimate a2_product_mc(const ExtensionParams& ep, const BallQuery& q,
                         RngStream& rng);

struct A2DivergenceProbe {
  std::vector<std::size_t> budgets;
  std::vector<double> estimates;
  bool heavy_tail = false;
  /// Heavy tail at the largest budget and the estimate grew by at least
  /// kDivergenceGrowth across the doublings.
  bool divergent = false;
};
inline constexpr double kDivergenceGrowth = 2.0;

/// Nested estimates at mc_budget * 2^k, k = 0..doublings.
A2DivergenceProbe a2_divergence_probe(const ExtensionParams& ep,
                                      const BallQuery& q, RngStream& rng,
                                      int doublings = 4);

struct A2SurveyQuery {
  std::size_t balls = 1000;
  double r_min = 1e-3;
  double r_max = 1.0;
  /// Centres uniform in [-box, box]^N.
  double box = 1.0;
  std::size_t mc_budget = 1000;
};

struct A2Survey {
  std::vector<BallQuery> balls;
  std::vector<A2Estimate> estimates;
  double max_product = 0.0;
  /// Least-squares slope of log product against log radius.
  double radius_slope = 0.0;
  double radius_slope_stderr = 0.0;
  std::size_t heavy_tail_count = 0;
};

/// A2 products over random balls with log-uniform radii. Ball k uses
/// stream (seed, k).
A2Survey a2_random_ball_survey(const ExtensionParams& ep,
                               const A2SurveyQuery& q, std::uint64_t seed,
                               unsigned workers = 1);

/// Exact A2 product of y^exponent on [0, r]: 1 / ((1 + e)(1 - e)) for
/// |e| < 1, +inf otherwise.
double a2_interval_analytic(double exponent, double r);

struct MassScaling {
  std::vector<double> radii;
  std::vector<double> masses;
  std::vector<double> mass_stderr;
  double slope = 0.0;
  double stderr_ = 0.0;
};

/// top, top * ratio, top * ratio^2, ... (count values).
std::vector<double> geometric_radii(double top, std::size_t count,
                                    double ratio = 0.5);

/// Largest admissible radius at y: min(least positive folded gap, delta) / 4.
double ball_mass_radius_bound(const ExtensionParams& ep,
                              std::span<const double> y,
                              double tie_tolerance = 0.0);

/// Fitted slope of log q-hat(B_r(y)) against log r. The same unit-ball
/// draws are reused at every radius.
MassScaling ball_mass_exponent(const ExtensionParams& ep,
                               std::span<const double> y,
                               std::span<const double> radii,
                               std::size_t mc_budget, RngStream& rng,
                               double tie_tolerance = 0.0);

// ---------------------------------------------------------------------------
// Boundary regularity

enum class WienerBranch { a, b };

struct RegularityReport {
  AmbientPoint point;
  double h = 0.0;
  double h_prime = 0.0;
  WienerBranch branch = WienerBranch::a;
  bool regular = true;
};

RegularityReport wiener_classify(const ExtensionParams& ep,
                                 std::span<const double> z,
                                 double tie_tolerance = 0.0);

/// (int_r^R0 s^{h'(y)} ds)^{-1} in closed form. R0 must lie below
/// ball_mass_radius_bound(y).
double capacity_asymptotic(const ExtensionParams& ep,
                           std::span<const double> y, double r, double R0,
                           double tie_tolerance = 0.0);

// ---------------------------------------------------------------------------
// Semimartingale property

/// beta' >= 1.
bool semimartingale_classify(const ModelParams& p);

struct FvLevel {
  double dt = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double mean_cap_hits = 0.0;
};

enum class FvVerdict { stabilizes, grows, inconclusive };
std::string to_string(FvVerdict v);

struct FvLadder {
  std::vector<FvLevel> levels;
  /// mean[k+1] / mean[k].
  std::vector<double> ratios;
  FvVerdict verdict = FvVerdict::inconclusive;
};

inline constexpr double kFvStableLow = 0.9;
inline constexpr double kFvStableHigh = 1.1;
inline constexpr double kFvGrowth = 1.5;

/// Builds the integrator configuration for one ladder level from its dt.
using LevelConfig = std::function<IntegratorConfig(double dt)>;

/// Mean fv_variation over `paths` paths started from q_N, at every dt of
/// the ladder. Path k starts from stream (seed, k); its noise at level l
/// comes from stream (seed, (l + 1) 2^32 + k). Without `level_config` each
/// level uses IntegratorConfig::with_defaults(dt).
FvLadder fv_refinement_ladder(const ModelParams& p, std::span<const double> dts,
                              std::size_t paths, double t_end,
                              std::uint64_t seed,
                              const LevelConfig& level_config = {},
                              unsigned workers = 1);

struct NuMass {
  double nu1 = 0.0;
  double nu2 = 0.0;
  /// int_0^eps y^{beta'-2} dy, the factor that decides finiteness.
  double singular_factor = 0.0;
};

/// Masses of the Jordan parts of the measure representing the energy of
/// u(x) = x^i over the gap box near the face x^i = x^{i+1}.
NuMass nu_mass(const ModelParams& p, int i, double eps);

// ---------------------------------------------------------------------------
// Integration by parts

struct ScalarFunction {
  std::function<double(std::span<const double>)> value;
  /// Optional; central differences with step 1e-6 otherwise.
  std::function<void(std::span<const double>, std::span<double>)> gradient;
};

struct IbpResidual {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double rejection_rate() const {
    const std::size_t total = accepted + rejected;
    return total == 0 ? 0.0 : static_cast<double>(rejected) / total;
  }
};

inline constexpr double kMaxIbpRejectionRate = 1e-3;

/// Mean of <grad u, w phi> + u (w V + <grad w, phi>) over the samples.
IbpResidual ibp_residual(const ModelParams& p, const ScalarFunction& u,
                         const TestVectorField& tvf,
                         std::span<const SimplexPoint> samples);

struct IbpCase {
  std::string name;
  ScalarFunction u;
  TestVectorField field;
};

/// Five fixed (u, w, phi) triples used by the residual battery.
std::vector<IbpCase> standard_ibp_battery();

}  // namespace simplexbessel
