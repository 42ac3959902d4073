#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "simplexbessel/model.hpp"
#include "simplexbessel/rng.hpp"

namespace simplexbessel {

enum class Scheme { fold_em, gap_em };
enum class Coupling { synchronous, reflection };

Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme s);
Coupling parse_coupling(const std::string& name);
std::string to_string(Coupling c);

/// Thrown when the state stops being finite. Carries the base step index.
class IntegratorFailure : public std::runtime_error {
 public:
  IntegratorFailure(const std::string& what, std::uint64_t step)
      : std::runtime_error(what), step_(step) {}
  std::uint64_t step_index() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

/// Time-stepping parameters.
///
/// Substepping: a step of size h = dt / 4^k is split into four steps of size
/// h / 4 while some gap is below min_gap / 2^k and k < max_substep_depth.
/// No substeps are taken when beta' = 1 (zero drift).
/// The drift cap bounds every applied component |b_i| h by drift_cap / 2^k.
/// Both thresholds shrink like sqrt(h) so they keep their meaning in units
/// of the local noise amplitude.
struct IntegratorConfig {
  double dt = 1e-4;
  Scheme scheme = Scheme::fold_em;
  std::optional<double> drift_cap;
  double min_gap = 0.0;
  RngStream seed{0, 0};
  int max_substep_depth = 5;
  std::size_t record_stride = 1;

  /// min_gap = 10 sqrt(2 dt), drift_cap = 0.25 min_gap.
  static IntegratorConfig with_defaults(double dt, RngStream seed,
                                        Scheme scheme = Scheme::fold_em);
  static double default_min_gap(double dt);

  void validate() const;
  /// sqrt(dt) / 10.
  double merge_tolerance() const;
};

struct ReflectionEvents {
  std::uint64_t boundary_folds = 0;
  std::uint64_t reorders = 0;
  std::uint64_t total() const noexcept { return boundary_folds + reorders; }
};

/// Recorded path. times[0] = 0 and states[k] is the state at times[k].
/// Per-interval vectors have times.size() - 1 entries; entry k covers
/// (times[k], times[k+1]].
struct Trajectory {
  std::vector<double> times;
  std::vector<SimplexPoint> states;
  /// Signed sum of the applied drift increments b h over the interval.
  std::vector<std::vector<double>> fv_increments;
  /// Sum over integrator steps of |b h|_1 within the interval.
  std::vector<double> fv_l1;
  /// Drift mass removed by the cap (finite excess only).
  std::vector<double> capped_mass;
  /// Integrator steps in which the cap bound.
  std::vector<std::uint64_t> cap_hits;
  std::vector<ReflectionEvents> reflection_events;
  std::uint64_t integrator_steps = 0;
};

struct CoupledPair {
  Trajectory a;
  Trajectory b;
  Coupling coupling = Coupling::synchronous;
  /// |X^a_t - X^b_t| at each recorded time.
  std::vector<double> distances;
  /// Recorded index from which the copies coincide, if they merged.
  std::optional<std::size_t> merged_at;
};

struct StepResult {
  SimplexPoint state;
  std::vector<double> applied_drift;
  ReflectionEvents events;
  double capped_mass = 0.0;
};

/// One step of size cfg.dt driven by the caller's standard normals.
StepResult step(const ModelParams& p, const IntegratorConfig& cfg,
                const SimplexPoint& x, std::span<const double> gaussians);

/// Folds v into [0, 1] by repeated reflection at 0 and 1. Returns the
/// number of reflections applied.
int fold_unit_interval(double& v);

Trajectory simulate(const ModelParams& p, const IntegratorConfig& cfg,
                    const SimplexPoint& x0, double t_end);

CoupledPair simulate_coupled(const ModelParams& p, const IntegratorConfig& cfg,
                             const SimplexPoint& x0, const SimplexPoint& y0,
                             Coupling coupling, double t_end);

/// Sum over the path of |applied drift increment|_1.
double fv_variation(const Trajectory& traj);

/// t,x1..xN,fv_l1,reflections with cumulative fv_l1 and reflection counts.
void write_csv(std::ostream& os, const Trajectory& traj);
/// t,a_x1..a_xN,b_x1..b_xN,fv_l1_a,fv_l1_b,reflections_a,reflections_b,dist.
void write_csv(std::ostream& os, const CoupledPair& pair);

}  // namespace simplexbessel
