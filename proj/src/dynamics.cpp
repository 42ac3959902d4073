#include "simplexbessel/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "simplexbessel/report.hpp"

namespace simplexbessel {

Scheme parse_scheme(const std::string& name) {
  if (name == "fold_em") return Scheme::fold_em;
  if (name == "gap_em") return Scheme::gap_em;
  throw std::invalid_argument("unknown scheme '" + name +
                              "' (expected fold_em or gap_em)");
}

std::string to_string(Scheme s) {
  return s == Scheme::fold_em ? "fold_em" : "gap_em";
}

Coupling parse_coupling(const std::string& name) {
  if (name == "synchronous") return Coupling::synchronous;
  if (name == "reflection") return Coupling::reflection;
  throw std::invalid_argument("unknown coupling '" + name +
                              "' (expected synchronous or reflection)");
}

std::string to_string(Coupling c) {
  return c == Coupling::synchronous ? "synchronous" : "reflection";
}

double IntegratorConfig::default_min_gap(double dt) {
  return 10.0 * std::sqrt(2.0 * dt);
}

IntegratorConfig IntegratorConfig::with_defaults(double dt, RngStream seed,
                                                 Scheme scheme) {
  IntegratorConfig cfg;
  cfg.dt = dt;
  cfg.scheme = scheme;
  cfg.seed = seed;
  cfg.min_gap = default_min_gap(dt);
  cfg.drift_cap = 0.25 * cfg.min_gap;
  return cfg;
}

void IntegratorConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw std::invalid_argument("IntegratorConfig: dt must be positive");
  }
  if (drift_cap && !(*drift_cap > 0.0)) {
    throw std::invalid_argument("IntegratorConfig: drift_cap must be positive");
  }
  if (!(min_gap >= 0.0)) {
    throw std::invalid_argument("IntegratorConfig: min_gap must be >= 0");
  }
  if (max_substep_depth < 0) {
    throw std::invalid_argument(
        "IntegratorConfig: max_substep_depth must be >= 0");
  }
  if (record_stride < 1) {
    throw std::invalid_argument("IntegratorConfig: record_stride must be >= 1");
  }
}

double IntegratorConfig::merge_tolerance() const { return std::sqrt(dt) / 10.0; }

int fold_unit_interval(double& v) {
  if (!std::isfinite(v)) return 0;
  int folds = 0;
  if (v < 0.0) {
    v = -v;
    ++folds;
  }
  if (v > 1.0) {
    if (v > 4.0) {
      const double whole = std::floor(v);
      folds += static_cast<int>(std::min(whole, 1e9));
      v = std::fmod(v, 2.0);
    }
    while (v > 1.0) {
      v = 2.0 - v;
      ++folds;
      if (v < 0.0) {
        v = -v;
        ++folds;
      }
    }
  }
  return folds;
}

namespace {

struct Accumulator {
  std::vector<double> fv_vec;
  double fv_l1 = 0.0;
  double capped = 0.0;
  std::uint64_t cap_hits = 0;
  ReflectionEvents events;
  std::uint64_t steps = 0;

  explicit Accumulator(std::size_t n) : fv_vec(n, 0.0) {}
  void reset() {
    std::fill(fv_vec.begin(), fv_vec.end(), 0.0);
    fv_l1 = capped = 0.0;
    cap_hits = 0;
    events = {};
  }
};

class Engine {
 public:
  Engine(const ModelParams& p, const IntegratorConfig& cfg)
      : p_(p),
        cfg_(cfg),
        n_(static_cast<std::size_t>(p.n())),
        gaps_(n_ + 1),
        inc_(n_),
        noise_(n_),
        noise_b_(n_) {}

  std::size_t n() const { return n_; }

  double step_size(int level) const {
    return std::ldexp(cfg_.dt, -2 * level);
  }

  // Without drift the folded and sorted Gaussian step is exact in law, so
  // there is nothing for substeps to resolve.
  bool needs_substep(std::span<const double> x, int level) const {
    if (cfg_.min_gap <= 0.0 || level >= cfg_.max_substep_depth) return false;
    if (p_.beta_prime() == 1.0) return false;
    const double threshold = std::ldexp(cfg_.min_gap, -level);
    double prev = 0.0;
    for (double v : x) {
      if (v - prev < threshold) return true;
      prev = v;
    }
    return 1.0 - prev < threshold;
  }

  /// One Euler step of size dt / 4^level driven by `g`. A `mirror`
  /// accumulator receives the same bookkeeping (merged coupled copies).
  void elementary(std::span<double> x, std::span<const double> g, int level,
                  Accumulator& acc, Accumulator* mirror = nullptr) {
    const double h = step_size(level);
    const double noise_scale = std::sqrt(2.0 * h);
    gaps_of(x, gaps_);
    double capped_mass = 0.0;
    std::uint64_t cap_hits = 0;
    compute_increment(h, level, capped_mass, cap_hits);
    ReflectionEvents ev;

    if (cfg_.scheme == Scheme::fold_em) {
      for (std::size_t i = 0; i < n_; ++i) {
        x[i] += inc_[i] + noise_scale * g[i];
        ev.boundary_folds +=
            static_cast<std::uint64_t>(fold_unit_interval(x[i]));
      }
      for (std::size_t i = 1; i < n_; ++i) {
        const double v = x[i];
        std::size_t j = i;
        while (j > 0 && x[j - 1] > v) {
          x[j] = x[j - 1];
          --j;
          ++ev.reorders;
        }
        x[j] = v;
      }
    } else {
      double sum = 0.0;
      for (std::size_t i = 0; i <= n_; ++i) {
        const double inc_hi = i < n_ ? inc_[i] : 0.0;
        const double inc_lo = i > 0 ? inc_[i - 1] : 0.0;
        const double g_hi = i < n_ ? g[i] : 0.0;
        const double g_lo = i > 0 ? g[i - 1] : 0.0;
        double gi = gaps_[i] + (inc_hi - inc_lo) + noise_scale * (g_hi - g_lo);
        if (gi < 0.0) {
          gi = -gi;
          if (i == 0 || i == n_) {
            ++ev.boundary_folds;
          } else {
            ++ev.reorders;
          }
        }
        gaps_[i] = gi;
        sum += gi;
      }
      double c = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        c += gaps_[i];
        x[i] = std::min(c / sum, 1.0);
      }
    }

    for (std::size_t i = 0; i < n_; ++i) {
      if (!std::isfinite(x[i])) {
        std::ostringstream msg;
        msg << "integrator produced a non-finite state at step "
            << current_step_;
        throw IntegratorFailure(msg.str(), current_step_);
      }
    }
    for (Accumulator* a : {&acc, mirror}) {
      if (!a) continue;
      for (std::size_t i = 0; i < n_; ++i) {
        a->fv_vec[i] += inc_[i];
        a->fv_l1 += std::abs(inc_[i]);
      }
      a->capped += capped_mass;
      a->cap_hits += cap_hits;
      a->events.boundary_folds += ev.boundary_folds;
      a->events.reorders += ev.reorders;
      ++a->steps;
    }
  }

  /// Advances x by one step of size dt / 4^level, substepping as needed.
  void advance(std::span<double> x, int level, RngStream& rng,
               Accumulator& acc, Accumulator* mirror = nullptr) {
    if (needs_substep(x, level)) {
      for (int k = 0; k < 4; ++k) advance(x, level + 1, rng, acc, mirror);
      return;
    }
    for (auto& v : noise_) v = rng.normal();
    elementary(x, noise_, level, acc, mirror);
  }

  void advance_pair(std::span<double> xa, std::span<double> xb, int level,
                    Coupling coupling, double merge_tol, bool& merged,
                    RngStream& rng, Accumulator& acc_a, Accumulator& acc_b) {
    if (needs_substep(xa, level) || (!merged && needs_substep(xb, level))) {
      for (int k = 0; k < 4; ++k) {
        advance_pair(xa, xb, level + 1, coupling, merge_tol, merged, rng,
                     acc_a, acc_b);
      }
      return;
    }
    for (auto& v : noise_) v = rng.normal();
    if (merged) {
      elementary(xa, noise_, level, acc_a, &acc_b);
      std::copy(xa.begin(), xa.end(), xb.begin());
      return;
    }
    if (coupling == Coupling::reflection) {
      double norm2 = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double d = xa[i] - xb[i];
        norm2 += d * d;
      }
      const double norm = std::sqrt(norm2);
      double proj = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        proj += noise_[i] * (xa[i] - xb[i]) / norm;
      }
      for (std::size_t i = 0; i < n_; ++i) {
        noise_b_[i] = noise_[i] - 2.0 * proj * (xa[i] - xb[i]) / norm;
      }
    } else {
      noise_b_ = noise_;
    }
    elementary(xa, noise_, level, acc_a);
    elementary(xb, noise_b_, level, acc_b);
    if (coupling == Coupling::reflection) {
      double norm2 = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        const double d = xa[i] - xb[i];
        norm2 += d * d;
      }
      if (std::sqrt(norm2) <= merge_tol) {
        std::copy(xa.begin(), xa.end(), xb.begin());
        merged = true;
      }
    }
  }

  void set_step(std::uint64_t s) { current_step_ = s; }

 private:
  void compute_increment(double h, int level, double& capped_mass,
                         std::uint64_t& cap_hits) {
    const double c = p_.beta_prime() - 1.0;
    if (c == 0.0) {
      std::fill(inc_.begin(), inc_.end(), 0.0);
      return;
    }
    const bool capped = cfg_.drift_cap.has_value();
    const double cap = capped ? std::ldexp(*cfg_.drift_cap, -level) : 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double raw = c * (1.0 / gaps_[i] - 1.0 / gaps_[i + 1]) * h;
      if (!capped) {
        if (!std::isfinite(raw)) {
          std::ostringstream msg;
          msg << "drift is not finite at step " << current_step_
              << " (a gap next to particle " << i + 1 << " vanished)";
          throw IntegratorFailure(msg.str(), current_step_);
        }
      } else if (std::isnan(raw)) {
        // Both neighbouring gaps vanished; the two pushes cancel.
        raw = 0.0;
        ++cap_hits;
      } else if (std::abs(raw) > cap) {
        if (std::isfinite(raw)) capped_mass += std::abs(raw) - cap;
        raw = std::copysign(cap, raw);
        ++cap_hits;
      }
      inc_[i] = raw;
    }
  }

  const ModelParams& p_;
  const IntegratorConfig& cfg_;
  std::size_t n_;
  std::vector<double> gaps_;
  std::vector<double> inc_;
  std::vector<double> noise_;
  std::vector<double> noise_b_;
  std::uint64_t current_step_ = 0;
};

std::uint64_t step_count(const IntegratorConfig& cfg, double t_end) {
  if (!(t_end > 0.0) || !std::isfinite(t_end)) {
    throw std::invalid_argument("simulate: t_end must be positive");
  }
  const double ratio = t_end / cfg.dt;
  const auto n = static_cast<std::uint64_t>(std::llround(ratio));
  if (n < 1) throw std::invalid_argument("simulate: t_end shorter than dt");
  return n;
}

void start_record(Trajectory& traj, std::span<const double> x) {
  traj.times.push_back(0.0);
  traj.states.push_back(
      SimplexPoint::trusted(std::vector<double>(x.begin(), x.end())));
}

void push_record(Trajectory& traj, double t, std::span<const double> x,
                 Accumulator& acc) {
  traj.times.push_back(t);
  traj.states.push_back(
      SimplexPoint::trusted(std::vector<double>(x.begin(), x.end())));
  traj.fv_increments.push_back(acc.fv_vec);
  traj.fv_l1.push_back(acc.fv_l1);
  traj.capped_mass.push_back(acc.capped);
  traj.cap_hits.push_back(acc.cap_hits);
  traj.reflection_events.push_back(acc.events);
  traj.integrator_steps += acc.steps;
  acc.steps = 0;
  acc.reset();
}

void check_start(const SimplexPoint& x0, const ModelParams& p) {
  if (static_cast<int>(x0.size()) != p.n()) {
    throw std::invalid_argument("simulate: start point has wrong dimension");
  }
  if (!in_closed_simplex(x0)) {
    throw std::invalid_argument("simulate: start point outside the simplex");
  }
}

}  // namespace

StepResult step(const ModelParams& p, const IntegratorConfig& cfg,
                const SimplexPoint& x, std::span<const double> gaussians) {
  cfg.validate();
  check_start(x, p);
  if (gaussians.size() != x.size()) {
    throw std::invalid_argument("step: need one gaussian per particle");
  }
  Engine engine(p, cfg);
  Accumulator acc(x.size());
  std::vector<double> state(x.coords());
  engine.elementary(state, gaussians, 0, acc);
  return StepResult{SimplexPoint::trusted(std::move(state)), acc.fv_vec,
                    acc.events, acc.capped};
}

Trajectory simulate(const ModelParams& p, const IntegratorConfig& cfg,
                    const SimplexPoint& x0, double t_end) {
  cfg.validate();
  check_start(x0, p);
  const std::uint64_t n_steps = step_count(cfg, t_end);
  Engine engine(p, cfg);
  Accumulator acc(x0.size());
  RngStream rng = cfg.seed;
  std::vector<double> x(x0.coords());
  Trajectory traj;
  start_record(traj, x);
  for (std::uint64_t s = 0; s < n_steps; ++s) {
    engine.set_step(s);
    engine.advance(x, 0, rng, acc);
    if ((s + 1) % cfg.record_stride == 0 || s + 1 == n_steps) {
      push_record(traj, static_cast<double>(s + 1) * cfg.dt, x, acc);
    }
  }
  return traj;
}

CoupledPair simulate_coupled(const ModelParams& p, const IntegratorConfig& cfg,
                             const SimplexPoint& x0, const SimplexPoint& y0,
                             Coupling coupling, double t_end) {
  cfg.validate();
  check_start(x0, p);
  check_start(y0, p);
  const std::uint64_t n_steps = step_count(cfg, t_end);
  const double merge_tol = cfg.merge_tolerance();
  Engine engine(p, cfg);
  Accumulator acc_a(x0.size());
  Accumulator acc_b(x0.size());
  RngStream rng = cfg.seed;
  std::vector<double> xa(x0.coords());
  std::vector<double> xb(y0.coords());

  auto distance = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < xa.size(); ++i) {
      const double d = xa[i] - xb[i];
      s += d * d;
    }
    return std::sqrt(s);
  };

  CoupledPair pair;
  pair.coupling = coupling;
  bool merged = xa == xb;
  start_record(pair.a, xa);
  start_record(pair.b, xb);
  pair.distances.push_back(distance());
  if (merged) pair.merged_at = 0;

  for (std::uint64_t s = 0; s < n_steps; ++s) {
    engine.set_step(s);
    if (merged) {
      engine.advance(xa, 0, rng, acc_a, &acc_b);
      std::copy(xa.begin(), xa.end(), xb.begin());
    } else {
      engine.advance_pair(xa, xb, 0, coupling, merge_tol, merged, rng, acc_a,
                          acc_b);
    }
    if ((s + 1) % cfg.record_stride == 0 || s + 1 == n_steps) {
      const double t = static_cast<double>(s + 1) * cfg.dt;
      push_record(pair.a, t, xa, acc_a);
      push_record(pair.b, t, xb, acc_b);
      pair.distances.push_back(distance());
      if (merged && !pair.merged_at) pair.merged_at = pair.distances.size() - 1;
    }
  }
  return pair;
}

double fv_variation(const Trajectory& traj) {
  if (traj.times.empty()) {
    throw std::invalid_argument("fv_variation: empty trajectory");
  }
  double total = 0.0;
  for (double v : traj.fv_l1) total += v;
  return total;
}

void write_csv(std::ostream& os, const Trajectory& traj) {
  const std::size_t n = traj.states.empty() ? 0 : traj.states.front().size();
  os << 't';
  for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
  os << ",fv_l1,reflections\n";
  double fv = 0.0;
  std::uint64_t refl = 0;
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    if (k > 0) {
      fv += traj.fv_l1[k - 1];
      refl += traj.reflection_events[k - 1].total();
    }
    os << format_real(traj.times[k]);
    for (std::size_t i = 0; i < n; ++i) os << ',' << format_real(traj.states[k][i]);
    os << ',' << format_real(fv) << ',' << refl << '\n';
  }
}

void write_csv(std::ostream& os, const CoupledPair& pair) {
  const std::size_t n =
      pair.a.states.empty() ? 0 : pair.a.states.front().size();
  os << 't';
  for (std::size_t i = 1; i <= n; ++i) os << ",a_x" << i;
  for (std::size_t i = 1; i <= n; ++i) os << ",b_x" << i;
  os << ",fv_l1_a,fv_l1_b,reflections_a,reflections_b,dist\n";
  double fv_a = 0.0, fv_b = 0.0;
  std::uint64_t ra = 0, rb = 0;
  for (std::size_t k = 0; k < pair.a.times.size(); ++k) {
    if (k > 0) {
      fv_a += pair.a.fv_l1[k - 1];
      fv_b += pair.b.fv_l1[k - 1];
      ra += pair.a.reflection_events[k - 1].total();
      rb += pair.b.reflection_events[k - 1].total();
    }
    os << format_real(pair.a.times[k]);
    for (std::size_t i = 0; i < n; ++i) os << ',' << format_real(pair.a.states[k][i]);
    for (std::size_t i = 0; i < n; ++i) os << ',' << format_real(pair.b.states[k][i]);
    os << ',' << format_real(fv_a) << ',' << format_real(fv_b) << ',' << ra
       << ',' << rb << ',' << format_real(pair.distances[k]) << '\n';
  }
}

}  // namespace simplexbessel
