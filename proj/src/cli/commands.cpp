#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "simplexbessel/cli.hpp"
#include "simplexbessel/diagnostics.hpp"
#include "simplexbessel/dynamics.hpp"
#include "simplexbessel/parallel.hpp"
#include "simplexbessel/report.hpp"
#include "simplexbessel/sampler.hpp"

#ifndef SIMPLEXBESSEL_GIT_DESCRIBE
#define SIMPLEXBESSEL_GIT_DESCRIBE "unknown"
#endif

namespace simplexbessel::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kStartStreams = std::uint64_t{1} << 40;
constexpr std::uint64_t kAuxStreams = std::uint64_t{1} << 41;
constexpr std::size_t kSampleChunk = 4096;

class Outputs {
 public:
  Outputs(const RunContext& ctx, std::string command)
      : ctx_(ctx), command_(std::move(command)) {
    std::error_code ec;
    fs::create_directories(ctx.out_dir, ec);
    if (ec) {
      throw std::runtime_error("cannot create output directory " +
                               ctx.out_dir.string() + ": " + ec.message());
    }
  }

  bool csv() const { return ctx_.config.output.wants("csv"); }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = ctx_.out_dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw std::runtime_error("cannot write " + path.string());
    files_.push_back(name);
  }

  void add(EstimatorReport report) {
    report.seed = ctx_.config.run.seed;
    reports_.push_back(report.to_json());
  }

  /// Writes the report file (when JSON output is on) and the manifest.
  void finish(double wall_seconds) {
    if (ctx_.config.output.wants("json")) {
      json doc{{"command", command_}, {"reports", reports_}};
      write(command_ + ".json", doc.dump(2) + "\n");
    }
    json manifest{{"command", command_},
                  {"config", ctx_.config.document},
                  {"seed", ctx_.config.run.seed},
                  {"git_describe", SIMPLEXBESSEL_GIT_DESCRIBE},
                  {"workers", ctx_.workers},
                  {"wall_time_seconds", wall_seconds},
                  {"outputs", files_}};
    const fs::path path = ctx_.out_dir / (command_ + ".manifest.json");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write " + path.string());
  }

 private:
  const RunContext& ctx_;
  std::string command_;
  std::vector<std::string> files_;
  json reports_ = json::array();
};

ModelParams model_of(const ExperimentConfig& cfg) {
  return ModelParams(cfg.model.n, cfg.model.beta);
}

ModelParams model_with_beta(const ExperimentConfig& cfg, double beta) {
  if (!(beta > 0.0)) throw cfg.error("experiment.betas", "entries must be positive");
  return ModelParams(cfg.model.n, beta);
}

IntegratorConfig integrator_for(const ExperimentConfig& cfg, double dt,
                                RngStream seed) {
  IntegratorConfig ic =
      IntegratorConfig::with_defaults(dt, seed, parse_scheme(cfg.integrator.scheme));
  if (cfg.integrator.min_gap) ic.min_gap = *cfg.integrator.min_gap;
  if (cfg.integrator.drift_cap) ic.drift_cap = *cfg.integrator.drift_cap;
  if (cfg.integrator.drift_cap_disabled) ic.drift_cap.reset();
  ic.record_stride = cfg.run.record_stride;
  ic.validate();
  return ic;
}

json params_json(const ModelParams& p) {
  return json{{"n", p.n()}, {"beta", p.beta()}, {"beta_prime", p.beta_prime()}};
}

json reals_json(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(json_real(x));
  return a;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stderr_of(std::span<const double> v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double n = static_cast<double>(v.size());
  return n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
}

std::vector<SimplexPoint> invariant_draws(const ModelParams& p, std::size_t count,
                                          std::uint64_t seed, unsigned workers) {
  const std::size_t chunks = (count + kSampleChunk - 1) / kSampleChunk;
  std::vector<std::vector<SimplexPoint>> parts(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    RngStream rng(seed, c);
    const std::size_t take = std::min(kSampleChunk, count - c * kSampleChunk);
    parts[c] = sample_invariant(p, rng, take).points;
  });
  std::vector<SimplexPoint> all;
  all.reserve(count);
  for (auto& part : parts) {
    for (auto& pt : part) all.push_back(std::move(pt));
  }
  return all;
}

std::vector<double> gap_means(std::span<const SimplexPoint> pts, int n,
                              std::vector<double>* stderrs = nullptr) {
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(n) + 1);
  std::vector<double> g(cols.size());
  for (const auto& pt : pts) {
    gaps_of(pt, g);
    for (std::size_t i = 0; i < g.size(); ++i) cols[i].push_back(g[i]);
  }
  std::vector<double> means;
  for (const auto& c : cols) {
    means.push_back(mean_of(c));
    if (stderrs) stderrs->push_back(stderr_of(c));
  }
  return means;
}

// Header row for coordinate columns: prefix1,...,prefixN.
std::string coord_header(const std::string& prefix, int n) {
  std::string h;
  for (int i = 1; i <= n; ++i) h += "," + prefix + std::to_string(i);
  return h;
}

std::string coord_cells(std::span<const double> v) {
  std::string s;
  for (double x : v) s += "," + format_real(x);
  return s;
}

// ---------------------------------------------------------------------------

void cmd_sample(const RunContext& ctx, Outputs& out) {
  const auto& cfg = ctx.config;
  ExperimentReader ex(cfg, {"samples"});
  const auto count = ex.integer("samples", static_cast<std::int64_t>(cfg.run.paths));
  if (count < 1) throw cfg.error("experiment.samples", "must be >= 1");
  const ModelParams p = model_of(cfg);
  auto points = invariant_draws(p, static_cast<std::size_t>(count), cfg.run.seed,
                                ctx.workers);
  if (out.csv()) {
    std::ostringstream os;
    write_csv(os, SampleBatch{points, p, RngStream(cfg.run.seed, 0)});
    out.write("sample.csv", os.str());
  }
  std::vector<double> se;
  const auto means = gap_means(points, p.n(), &se);
  EstimatorReport r;
  r.name = "sample_gap_means";
  r.params = params_json(p);
  r.estimate = means.front();
  r.stderr_ = se.front();
  r.budget = static_cast<std::uint64_t>(count);
  r.extra = {{"gap_means", reals_json(means)},
             {"gap_stderr", reals_json(se)},
             {"expected_gap_mean", 1.0 / (p.n() + 1)}};
  out.add(r);
}

void cmd_simulate(const RunContext& ctx, Outputs& out) {
  const auto& cfg = ctx.config;
  ExperimentReader ex(cfg, {"start"});
  const ModelParams p = model_of(cfg);
  const std::size_t n = static_cast<std::size_t>(p.n());
  std::optional<SimplexPoint> fixed;
  if (ex.has("start") && !cfg.experiment.at("start").is_string()) {
    const auto coords = ex.reals("start", {});
    if (coords.size() != n) throw cfg.error("experiment.start", "needs n coordinates");
    try {
      fixed = SimplexPoint(coords);
    } catch (const std::invalid_argument& e) {
      throw cfg.error("experiment.start", e.what());
    }
  } else if (ex.text("start", "invariant") != "invariant") {
    throw cfg.error("experiment.start", "must be \"invariant\" or a coordinate array");
  }
  const std::size_t paths = cfg.run.paths;
  std::vector<Trajectory> trajs(paths);
  parallel_for(paths, ctx.workers, [&](std::size_t k) {
    std::vector<double> x(n);
    if (fixed) {
      x = fixed->coords();
    } else {
      RngStream start(cfg.run.seed, kStartStreams + k);
      draw_invariant(p, start, x);
    }
    const auto ic = integrator_for(cfg, cfg.integrator.dt, RngStream(cfg.run.seed, k));
    trajs[k] = simulate(p, ic, SimplexPoint::trusted(x), cfg.run.t_end);
  });
  if (out.csv()) {
    std::ostringstream all;
    for (std::size_t k = 0; k < paths; ++k) {
      std::ostringstream one;
      write_csv(one, trajs[k]);
      std::istringstream lines(one.str());
      std::string line;
      bool header = true;
      while (std::getline(lines, line)) {
        if (header) {
          if (k == 0) all << "path," << line << '\n';
          header = false;
          continue;
        }
        all << k << ',' << line << '\n';
      }
    }
    out.write("simulate.csv", all.str());
  }
  std::vector<SimplexPoint> finals;
  std::vector<double> fv, refl, hits;
  std::uint64_t steps = 0;
  for (const auto& t : trajs) {
    finals.push_back(t.states.back());
    fv.push_back(fv_variation(t));
    std::uint64_t r = 0, h = 0;
    for (const auto& e : t.reflection_events) r += e.total();
    for (auto c : t.cap_hits) h += c;
    refl.push_back(static_cast<double>(r));
    hits.push_back(static_cast<double>(h));
    steps += t.integrator_steps;
  }
  std::vector<double> se;
  const auto means = gap_means(finals, p.n(), &se);
  EstimatorReport r;
  r.name = "simulate_final_gaps";
  r.params = params_json(p);
  r.params["dt"] = cfg.integrator.dt;
  r.params["t_end"] = cfg.run.t_end;
  r.params["scheme"] = cfg.integrator.scheme;
  r.estimate = means.front();
  r.stderr_ = se.front();
  r.budget = paths;
  r.extra = {{"final_gap_means", reals_json(means)},
             {"final_gap_stderr", reals_json(se)},
             {"mean_fv_variation", json_real(mean_of(fv))},
             {"mean_reflection_events", json_real(mean_of(refl))},
             {"mean_cap_hits", json_real(mean_of(hits))},
             {"integrator_steps", steps}};
  out.add(r);
}

void cmd_couple(const RunContext& ctx, Outputs& out) {
  const auto& cfg = ctx.config;
  ExperimentReader ex(cfg, {"coupling", "bootstrap", "lipschitz", "lipschitz_t",
                            "lipschitz_paths"});
  const ModelParams p = model_of(cfg);
  Coupling coupling;
  try {
    coupling = parse_coupling(ex.text("coupling", "reflection"));
  } catch (const std::invalid_argument& e) {
    throw cfg.error("experiment.coupling", e.what());
  }
  const auto resamples = ex.integer("bootstrap", 200);
  if (resamples < 2) throw cfg.error("experiment.bootstrap", "must be >= 2");
  const std::size_t n = static_cast<std::size_t>(p.n());
  const std::size_t pairs = cfg.run.paths;
  DistanceTable table;
  table.rows.resize(pairs);
  std::vector<std::vector<double>> grids(pairs);
  parallel_for(pairs, ctx.workers, [&](std::size_t k) {
    RngStream start(cfg.run.seed, kStartStreams + k);
    std::vector<double> x(n), y(n);
    draw_invariant(p, start, x);
    draw_invariant(p, start, y);
    const auto ic = integrator_for(cfg, cfg.integrator.dt, RngStream(cfg.run.seed, k));
    auto pair = simulate_coupled(p, ic, SimplexPoint::trusted(x),
                                 SimplexPoint::trusted(y), coupling, cfg.run.t_end);
    table.rows[k] = std::move(pair.distances);
    grids[k] = std::move(pair.a.times);
  });
  table.times = grids.front();
  const auto merge_tol = integrator_for(cfg, cfg.integrator.dt, RngStream(0, 0))
                             .merge_tolerance();
  const RateFit fit = fit_decay(table, merge_tol, RngStream(cfg.run.seed, kAuxStreams),
                                static_cast<int>(resamples));
  if (out.csv()) {
    std::ostringstream os;
    os << "t,mean_distance\n";
    for (std::size_t k = 0; k < fit.times.size(); ++k) {
      os << format_real(fit.times[k]) << ',' << format_real(fit.mean_distances[k]) << '\n';
    }
    out.write("couple.csv", os.str());
  }
  const double guaranteed = contraction_rate(p);
  EstimatorReport r;
  r.name = "fit_decay";
  r.params = params_json(p);
  r.params["coupling"] = to_string(coupling);
  r.params["dt"] = cfg.integrator.dt;
  r.params["t_end"] = cfg.run.t_end;
  r.estimate = fit.fitted_rate;
  r.stderr_ = fit.stderr_;
  r.budget = pairs;
  if (guaranteed <= 0.0) r.flags.push_back("rate_not_guaranteed");
  r.extra = {{"fitted_rate", json_real(fit.fitted_rate)},
             {"guaranteed_rate", json_real(guaranteed)},
             {"window", fit.window},
             {"merge_tolerance", merge_tol},
             {"times", reals_json(fit.times)},
             {"mean_distances", reals_json(fit.mean_distances)}};
  out.add(r);

  if (ex.boolean("lipschitz", false)) {
    LipschitzQuery q;
    q.t = ex.real("lipschitz_t", 1.0);
    q.paths = static_cast<int>(ex.integer("lipschitz_paths", 1000));
    if (!(q.t > 0.0)) throw cfg.error("experiment.lipschitz_t", "must be positive");
    if (q.paths < 2) throw cfg.error("experiment.lipschitz_paths", "must be >= 2");
    if (p.beta() < p.n() + 1) {
      throw cfg.error("model.beta", "lipschitz check needs beta >= n + 1");
    }
    const auto ic = integrator_for(cfg, cfg.integrator.dt,
                                   RngStream(cfg.run.seed, kAuxStreams + 1));
    const auto est = lipschitz_smoothing_check(p, ic, q, ctx.workers);
    const double bound = std::exp(-guaranteed * q.t);
    EstimatorReport l;
    l.name = "lipschitz_smoothing_check";
    l.params = params_json(p);
    l.params["t"] = q.t;
    l.estimate = est.ratio;
    l.stderr_ = est.stderr_;
    l.budget = static_cast<std::uint64_t>(q.paths) * q.start_pairs;
    l.extra = {{"bound", bound},
               {"within_bound", est.ratio <= bound + 3.0 * est.stderr_},
               {"x", reals_json(est.x)},
               {"y", reals_json(est.y)},
               {"direction", reals_json(est.direction)}};
    out.add(l);
  }
}

void cmd_fvtest(const RunContext& ctx, Outputs& out) {
  const auto& cfg = ctx.config;
  ExperimentReader ex(cfg, {"betas", "dt_ladder"});
  const auto betas = ex.reals("betas", {cfg.model.beta});
  const auto ladder = ex.reals("dt_ladder", {1e-3, 2.5e-4, 6.25e-5});
  if (ladder.size() < 2) throw cfg.error("experiment.dt_ladder", "needs two levels");
  for (double dt : ladder) {
    if (!(dt > 0.0)) throw cfg.error("experiment.dt_ladder", "entries must be positive");
  }
  if (cfg.run.paths < 2) throw cfg.error("run.paths", "fvtest needs at least 2 paths");
  std::ostringstream os;
  os << "beta,beta_prime,dt,mean_fv,stderr,mean_cap_hits\n";
  for (double beta : betas) {
    const ModelParams p = model_with_beta(cfg, beta);
    const LevelConfig level = [&](double dt) {
      return integrator_for(cfg, dt, RngStream(cfg.run.seed, 0));
    };
    const auto result = fv_refinement_ladder(p, ladder, cfg.run.paths, cfg.run.t_end,
                                             cfg.run.seed, level, ctx.workers);
    json levels = json::array();
    for (const auto& lv : result.levels) {
      os << format_real(beta) << ',' << format_real(p.beta_prime()) << ','
         << format_real(lv.dt) << ',' << format_real(lv.mean) << ','
         << format_real(lv.stderr_) << ',' << format_real(lv.mean_cap_hits) << '\n';
      levels.push_back({{"dt", lv.dt},
                        {"mean", json_real(lv.mean)},
                        {"stderr", json_real(lv.stderr_)},
                        {"mean_cap_hits", json_real(lv.mean_cap_hits)}});
    }
    const bool classify = semimartingale_classify(p);
    const bool agrees = (result.verdict == FvVerdict::stabilizes && classify) ||
                        (result.verdict == FvVerdict::grows && !classify);
    EstimatorReport r;
    r.name = "fv_refinement";
    r.params = params_json(p);
    r.params["t_end"] = cfg.run.t_end;
    r.estimate = result.ratios.back();
    r.stderr_ = 0.0;
    r.budget = cfg.run.paths * ladder.size();
    if (!agrees) r.flags.push_back("disagrees_with_classifier");
    r.extra = {{"levels", levels},
               {"ratios", reals_json(result.ratios)},
               {"verdict", to_string(result.verdict)},
               {"semimartingale", classify},
               {"agrees", agrees}};
    out.add(r);
  }
  if (out.csv()) out.write("fvtest.csv", os.str());
}

void cmd_a2(const RunContext& ctx, Outputs& out) {
  const auto& cfg = ctx.config;
  ExperimentReader ex(cfg, {"betas", "balls", "r_min", "r_max", "box", "mc_budget",
                            "diagonal_probe", "probe_radius", "probe_budget",
                            "interval_exponents"});
  const auto betas = ex.reals("betas", {cfg.model.beta});
  A2SurveyQuery q;
  q.balls = static_cast<std::size_t>(std::max<std::int64_t>(0, ex.integer("balls", 1000)));
  q.r_min = ex.real("r_min", 1e-3);
  q.r_max = ex.real("r_max", 1.0);
  q.box = ex.real("box", 1.0);
  q.mc_budget = static_cast<std::size_t>(std::max<std::int64_t>(0, ex.integer("mc_budget", 1000)));
  if (q.balls < 3) throw cfg.error("experiment.balls", "must be >= 3");
  if (!(q.r_min > 0.0 && q.r_max >= q.r_min)) {
    throw cfg.error("experiment.r_min", "need 0 < r_min <= r_max");
  }
  if (!(q.box > 0.0)) throw cfg.error("experiment.box", "must be positive");
  if (q.mc_budget < 1000) throw cfg.error("experiment.mc_budget", "must be >= 1000");
  const bool probe = ex.boolean("diagonal_probe", true);
  const double probe_radius = ex.real("probe_radius", 0.05);
  const auto probe_budget = ex.integer("probe_budget", 1000);
  if (probe && !(probe_radius > 0.0)) {
    throw cfg.error("experiment.probe_radius", "must be positive");
  }
  if (probe && probe_budget < 1000) {
    throw cfg.error("experiment.probe_budget", "must be >= 1000");
  }
  const int n = cfg.model.n;
  std::ostringstream os;
  os << "beta,ball" << coord_header("c", n)
     << ",radius,product,stderr,kurtosis_inverse,heavy_tail\n";
  for (std::size_t b = 0; b < betas.size(); ++b) {
    const ExtensionParams ep(model_with_beta(cfg, betas[b]), cfg.extension.delta);
    const auto survey = a2_random_ball_survey(ep, q, cfg.run.seed, ctx.workers);
    for (std::size_t k = 0; k < survey.balls.size(); ++k) {
      const auto& e = survey.estimates[k];
      os << format_real(betas[b]) << ',' << k << coord_cells(survey.balls[k].center.coords)
         << ',' << format_real(survey.balls[k].radius) << ',' << format_real(e.product)
         << ',' << format_real(e.stderr_) << ',' << format_real(e.kurtosis_inverse) << ','
         << (e.heavy_tail ? 1 : 0) << '\n';
    }
    EstimatorReport r;
    r.name = "a2_survey";
    r.params = params_json(ep.model());
    r.params["delta"] = ep.delta();
    r.estimate = survey.max_product;
    r.stderr_ = 0.0;
    r.budget = q.balls * q.mc_budget;
    if (survey.heavy_tail_count > 0) r.flags.push_back("heavy_tail");
    r.extra = {{"max_product", json_real(survey.max_product)},
               {"radius_slope", json_real(survey.radius_slope)},
               {"radius_slope_stderr", json_real(survey.radius_slope_stderr)},
               {"heavy_tail_count", survey.heavy_tail_count},
               {"balls", q.balls},
               {"r_min", q.r_min},
               {"r_max", q.r_max}};
    out.add(r);

    if (probe) {
      BallQuery ball;
      ball.center.coords.assign(static_cast<std::size_t>(n), 0.3);
      ball.radius = probe_radius;
      ball.mc_budget = static_cast<std::size_t>(probe_budget);
      RngStream rng(cfg.run.seed, kAuxStreams + b);
      const auto pr = a2_divergence_probe(ep, ball, rng);
      EstimatorReport d;
      d.name = "a2_divergence_probe";
      d.params = params_json(ep.model());
      d.params["radius"] = probe_radius;
      d.estimate = pr.estimates.back();
      d.budget = pr.budgets.back();
      if (pr.heavy_tail) d.flags.push_back("heavy_tail");
      if (pr.divergent) d.flags.push_back("divergent");
      json budgets = json::array();
      for (auto v : pr.budgets) budgets.push_back(v);
      d.extra = {{"budgets", budgets}, {"estimates", reals_json(pr.estimates)}};
      out.add(d);
    }
  }
  for (double e : ex.reals("interval_exponents", {-0.5, 0.0, 0.5, 1.0})) {
    EstimatorReport r;
    r.name = "a2_interval_analytic";
    r.params = {{"exponent", e}};
    r.estimate = a2_interval_analytic(e, 1.0);
    out.add(r);
  }
  if (out.csv()) out.write("a2.csv", os.str());
}

std::vector<int> strata_of(const ExperimentConfig& cfg, const ExperimentReader& ex) {
  std::vector<std::int64_t> fallback;
  for (int d = 0; d <= cfg.model.n; ++d) fallback.push_back(d);
  std::vector<int> strata;
  for (auto d : ex.integers("strata", fallback)) {
    if (d < 0 || d > cfg.model.n) throw cfg.error("experiment.strata", "entries must be in [0, n]");
    strata.push_back(static_cast<int>(d));
  }
  return strata;
}

void cmd_scaling(const RunContext& ctx, Outputs& out) {
  const auto& cfg = ctx.config;
  ExperimentReader ex(cfg, {"betas", "strata", "points", "mc_budget", "radii_count",
                            "radius_ratio"});
  const auto betas = ex.reals("betas", {cfg.model.beta});
  const auto strata = strata_of(cfg, ex);
  const auto points = ex.integer("points", 3);
  const auto budget = ex.integer("mc_budget", 20000);
  const auto radii_count = ex.integer("radii_count", 5);
  const double ratio = ex.real("radius_ratio", 0.5);
  if (points < 1) throw cfg.error("experiment.points", "must be >= 1");
  if (budget < 2) throw cfg.error("experiment.mc_budget", "must be >= 2");
  if (radii_count < 3) throw cfg.error("experiment.radii_count", "must be >= 3");
  if (!(ratio > 0.0 && ratio < 1.0)) throw cfg.error("experiment.radius_ratio", "must be in (0, 1)");
  const int n = cfg.model.n;
  std::ostringstream os;
  os << "beta,d,point" << coord_header("y", n) << ",h,slope,stderr,relative_error\n";
  for (double beta : betas) {
    const ExtensionParams ep(model_with_beta(cfg, beta), cfg.extension.delta);
    struct Job {
      int d;
      std::size_t j;
      AmbientPoint y;
      double h = 0.0;
      MassScaling fit;
    };
    std::vector<Job> jobs;
    for (int d : strata) {
      RngStream rng(cfg.run.seed, kStartStreams + static_cast<std::uint64_t>(d));
      const auto ys = probe_points(n, d, static_cast<std::size_t>(points), rng);
      for (std::size_t j = 0; j < ys.size(); ++j) jobs.push_back({d, j, ys[j], 0.0, {}});
    }
    parallel_for(jobs.size(), ctx.workers, [&](std::size_t k) {
      auto& job = jobs[k];
      const double bound = ball_mass_radius_bound(ep, job.y);
      const auto radii = geometric_radii(0.9 * bound, static_cast<std::size_t>(radii_count),
                                         ratio);
      RngStream rng(cfg.run.seed, (static_cast<std::uint64_t>(job.d) << 20) + job.j);
      job.fit = ball_mass_exponent(ep, job.y.coords, radii,
                                   static_cast<std::size_t>(budget), rng);
      job.h = scaling_exponent_h(ep.model(), job.y.coords);
    });
    std::map<int, std::vector<const Job*>> by_d;
    for (const auto& job : jobs) {
      by_d[job.d].push_back(&job);
      os << format_real(beta) << ',' << job.d << ',' << job.j << coord_cells(job.y.coords)
         << ',' << format_real(job.h) << ',' << format_real(job.fit.slope) << ','
         << format_real(job.fit.stderr_) << ','
         << format_real(std::abs(job.fit.slope - job.h) / job.h) << '\n';
    }
    for (const auto& [d, group] : by_d) {
      std::vector<double> slopes;
      double worst = 0.0;
      for (const Job* job : group) {
        slopes.push_back(job->fit.slope);
        worst = std::max(worst, std::abs(job->fit.slope - job->h) / job->h);
      }
      EstimatorReport r;
      r.name = "ball_mass_exponent";
      r.params = params_json(ep.model());
      r.params["d"] = d;
      r.params["delta"] = ep.delta();
      r.estimate = mean_of(slopes);
      r.stderr_ = stderr_of(slopes);
      r.budget = static_cast<std::uint64_t>(budget) * group.size();
      if (worst > 0.05) r.flags.push_back("outside_5_percent");
      r.extra = {{"expected_h", group.front()->h},
                 {"slopes", reals_json(slopes)},
                 {"max_relative_error", json_real(worst)}};
      out.add(r);
    }
  }
  if (out.csv()) out.write("scaling.csv", os.str());
}

void cmd_wiener(const RunContext& ctx, Outputs& out) {
  const auto& cfg = ctx.config;
  ExperimentReader ex(cfg, {"betas", "strata", "points", "r", "R0", "nu_eps"});
  const auto betas = ex.reals("betas", {cfg.model.beta});
  const auto strata = strata_of(cfg, ex);
  const auto points = ex.integer("points", 3);
  if (points < 1) throw cfg.error("experiment.points", "must be >= 1");
  const int n = cfg.model.n;
  const double eps = ex.real("nu_eps", 0.5 / (2.0 * (n + 2)));
  std::ostringstream os;
  os << "beta,d,point" << coord_header("z", n) << ",h,h_prime,branch,regular,capacity\n";
  for (double beta : betas) {
    const ExtensionParams ep(model_with_beta(cfg, beta), cfg.extension.delta);
    std::size_t count_a = 0, count_b = 0;
    bool all_regular = true;
    for (int d : strata) {
      RngStream rng(cfg.run.seed, kStartStreams + static_cast<std::uint64_t>(d));
      const auto zs = probe_points(n, d, static_cast<std::size_t>(points), rng);
      for (std::size_t j = 0; j < zs.size(); ++j) {
        const auto rep = wiener_classify(ep, zs[j].coords);
        const double bound = ball_mass_radius_bound(ep, zs[j].coords);
        const double R0 = ex.real("R0", 0.5 * bound);
        const double r = ex.real("r", 0.1 * R0);
        const double cap = capacity_asymptotic(ep, zs[j].coords, r, R0);
        (rep.branch == WienerBranch::a ? count_a : count_b)++;
        all_regular = all_regular && rep.regular;
        os << format_real(beta) << ',' << d << ',' << j << coord_cells(zs[j].coords) << ','
           << format_real(rep.h) << ',' << format_real(rep.h_prime) << ','
           << (rep.branch == WienerBranch::a ? "a" : "b") << ','
           << (rep.regular ? "true" : "false") << ',' << format_real(cap) << '\n';
      }
    }
    EstimatorReport w;
    w.name = "wiener_classify";
    w.params = params_json(ep.model());
    w.estimate = static_cast<double>(count_a);
    w.budget = count_a + count_b;
    w.extra = {{"branch_a", count_a}, {"branch_b", count_b}, {"all_regular", all_regular}};
    out.add(w);

    EstimatorReport s;
    s.name = "semimartingale_classify";
    s.params = params_json(ep.model());
    s.estimate = semimartingale_classify(ep.model()) ? 1.0 : 0.0;
    s.extra = {{"semimartingale", semimartingale_classify(ep.model())}};
    out.add(s);

    for (int i = 1; i <= n; ++i) {
      NuMass nu;
      try {
        nu = nu_mass(ep.model(), i, eps);
      } catch (const std::invalid_argument& e) {
        throw cfg.error("experiment.nu_eps", e.what());
      }
      EstimatorReport m;
      m.name = "nu_mass";
      m.params = params_json(ep.model());
      m.params["i"] = i;
      m.params["eps"] = eps;
      m.estimate = nu.nu1;
      if (std::isinf(nu.nu1)) m.flags.push_back("nu1_infinite");
      m.extra = {{"nu1", json_real(nu.nu1)},
                 {"nu2", json_real(nu.nu2)},
                 {"singular_factor", json_real(nu.singular_factor)}};
      out.add(m);
    }
  }
  if (out.csv()) out.write("wiener.csv", os.str());
}

void cmd_ibp(const RunContext& ctx, Outputs& out) {
  const auto& cfg = ctx.config;
  ExperimentReader ex(cfg, {"samples", "betas"});
  const auto count = ex.integer("samples", static_cast<std::int64_t>(cfg.run.paths));
  if (count < 2) throw cfg.error("experiment.samples", "must be >= 2");
  const auto betas = ex.reals("betas", {cfg.model.beta});
  const auto battery = standard_ibp_battery();
  std::ostringstream os;
  os << "beta,case,estimate,stderr,z,rejected\n";
  for (double beta : betas) {
    const ModelParams p = model_with_beta(cfg, beta);
    const auto samples =
        invariant_draws(p, static_cast<std::size_t>(count), cfg.run.seed, ctx.workers);
    std::vector<IbpResidual> results(battery.size());
    parallel_for(battery.size(), ctx.workers, [&](std::size_t c) {
      results[c] = ibp_residual(p, battery[c].u, battery[c].field, samples);
    });
    for (std::size_t c = 0; c < battery.size(); ++c) {
      const auto& res = results[c];
      const double z = res.stderr_ > 0.0 ? res.estimate / res.stderr_ : 0.0;
      os << format_real(beta) << ',' << battery[c].name << ',' << format_real(res.estimate)
         << ',' << format_real(res.stderr_) << ',' << format_real(z) << ','
         << res.rejected << '\n';
      EstimatorReport r;
      r.name = "ibp_residual";
      r.params = params_json(p);
      r.params["case"] = battery[c].name;
      r.estimate = res.estimate;
      r.stderr_ = res.stderr_;
      r.budget = static_cast<std::uint64_t>(count);
      if (std::abs(z) > 4.0) r.flags.push_back("beyond_4_stderr");
      r.extra = {{"z", json_real(z)},
                 {"rejected", res.rejected},
                 {"rejection_rate", res.rejection_rate()}};
      out.add(r);
    }
  }
  if (out.csv()) out.write("ibp.csv", os.str());
}

void cmd_report(const RunContext& ctx) {
  const fs::path dir = ctx.out_dir;
  std::vector<fs::path> files;
  std::error_code ec;
  if (fs::is_directory(dir, ec)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (entry.path().extension() != ".json") continue;
      if (name.ends_with(".manifest.json") || name == "summary.json") continue;
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  json rows = json::array();
  for (const auto& path : files) {
    std::ifstream in(path, std::ios::binary);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error&) {
      continue;
    }
    if (!doc.is_object() || !doc.contains("reports") || !doc["reports"].is_array()) continue;
    for (const auto& r : doc["reports"]) {
      json row = r;
      row["file"] = path.filename().string();
      rows.push_back(row);
    }
  }
  if (rows.empty()) throw std::runtime_error("no reports found in " + dir.string());
  std::ostringstream csv;
  csv << "file,name,estimate,stderr,budget,flags\n";
  std::ostringstream table;
  auto cell = [](const json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  for (const auto& row : rows) {
    std::string flags;
    for (const auto& f : row["flags"]) flags += (flags.empty() ? "" : ";") + f.get<std::string>();
    csv << cell(row["file"]) << ',' << cell(row["name"]) << ',' << cell(row["estimate"])
        << ',' << cell(row["stderr"]) << ',' << cell(row["budget"]) << ',' << flags << '\n';
    table << cell(row["file"]) << "  " << cell(row["name"]) << "  estimate="
          << cell(row["estimate"]) << "  stderr=" << cell(row["stderr"])
          << (flags.empty() ? "" : "  [" + flags + "]") << '\n';
  }
  Outputs out(ctx, "report");
  if (out.csv()) out.write("summary.csv", csv.str());
  if (ctx.config.output.wants("json")) {
    out.write("summary.json", json{{"reports", rows}}.dump(2) + "\n");
  }
  std::cout << table.str();
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "sample", "simulate", "couple", "fvtest", "a2",
      "scaling", "wiener", "ibp", "report"};
  return names;
}

void run_command(const std::string& name, const RunContext& ctx) {
  const auto started = std::chrono::steady_clock::now();
  if (name == "report") {
    cmd_report(ctx);
    return;
  }
  using Handler = void (*)(const RunContext&, Outputs&);
  static const std::map<std::string, Handler> handlers = {
      {"sample", cmd_sample}, {"simulate", cmd_simulate}, {"couple", cmd_couple},
      {"fvtest", cmd_fvtest}, {"a2", cmd_a2},             {"scaling", cmd_scaling},
      {"wiener", cmd_wiener}, {"ibp", cmd_ibp}};
  const auto it = handlers.find(name);
  if (it == handlers.end()) throw ConfigError("unknown subcommand '" + name + "'");
  Outputs out(ctx, name);
  it->second(ctx, out);
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - started;
  out.finish(wall.count());
}

int main_entry(int argc, char** argv) {
  CLI::App app{"Simulation and diagnostics for particle systems on the ordered simplex",
               "simplexbessel"};
  std::string command;
  std::string config_path;
  std::string out_dir;
  unsigned workers = 1;
  app.add_option("command", command, "Subcommand")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "JSON experiment configuration");
  app.add_option("--workers", workers, "Worker threads (results do not depend on it)")
      ->check(CLI::Range(1u, 1024u));
  app.add_option("--out", out_dir, "Output directory (overrides output.directory)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    RunContext ctx;
    ctx.workers = workers;
    if (!config_path.empty()) {
      ctx.config = load_config(config_path);
    } else if (command == "report" && !out_dir.empty()) {
      ctx.config = parse_config(R"({"model": {"n": 1, "beta": 1}})", "<defaults>");
    } else {
      throw ConfigError("--config is required");
    }
    ctx.out_dir = out_dir.empty() ? fs::path(ctx.config.output.directory) : fs::path(out_dir);
    run_command(command, ctx);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace simplexbessel::cli
