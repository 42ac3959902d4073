#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "simplexbessel/cli.hpp"
#include "simplexbessel/dynamics.hpp"
#include "simplexbessel/model.hpp"
#include "simplexbessel/symmetry.hpp"

namespace simplexbessel::cli {

using nlohmann::json;

bool OutputSection::wants(const std::string& format) const {
  return std::find(formats.begin(), formats.end(), format) != formats.end();
}

int locate_field(const std::string& text, const std::string& dotted) {
  std::size_t pos = 0;
  std::stringstream parts(dotted);
  std::string part;
  while (std::getline(parts, part, '.')) {
    const std::string quoted = "\"" + part + "\"";
    for (;;) {
      pos = text.find(quoted, pos);
      if (pos == std::string::npos) return 0;
      std::size_t after = pos + quoted.size();
      while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) {
        ++after;
      }
      if (after < text.size() && text[after] == ':') break;
      pos += quoted.size();
    }
  }
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + pos, '\n'));
}

ConfigError ExperimentConfig::error(const std::string& field,
                                    const std::string& message) const {
  const int line = locate_field(source_text, field);
  std::string where = source_name;
  if (line > 0) where += ":" + std::to_string(line);
  return ConfigError(where + ": " + field + ": " + message);
}

namespace {

void reject_unknown(const ExperimentConfig& cfg, const json& obj,
                    const std::string& prefix,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(),
                                [&](const char* a) { return key == a; });
    if (!ok) {
      throw cfg.error(prefix.empty() ? key : prefix + "." + key, "unknown key");
    }
  }
}

const json* section(const ExperimentConfig& cfg, const json& doc,
                    const char* name, bool required) {
  if (!doc.contains(name)) {
    if (required) throw cfg.error(name, "missing required section");
    return nullptr;
  }
  const json& s = doc.at(name);
  if (!s.is_object()) throw cfg.error(name, "must be an object");
  return &s;
}

double read_real(const ExperimentConfig& cfg, const json& obj,
                 const std::string& prefix, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw cfg.error(prefix + "." + key, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw cfg.error(prefix + "." + key, "must be finite");
  return d;
}

std::int64_t read_integer(const ExperimentConfig& cfg, const json& obj,
                          const std::string& prefix, const char* key) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) {
    throw cfg.error(prefix + "." + key, "must be an integer");
  }
  return v.get<std::int64_t>();
}

std::string real_text(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

ExperimentConfig parse_config(const std::string& text,
                              const std::string& source_name) {
  ExperimentConfig cfg;
  cfg.source_name = source_name;
  cfg.source_text = text;

  // One frame per open object: the keys seen so far and the dotted path
  // leading to it.
  struct Frame {
    std::set<std::string> keys;
    std::string path;
    std::string last_key;
  };
  std::vector<Frame> frames;
  std::string duplicate;
  json::parser_callback_t check_duplicates =
      [&](int, json::parse_event_t event, json& parsed) {
        if (event == json::parse_event_t::object_start) {
          std::string path;
          if (!frames.empty()) {
            const Frame& parent = frames.back();
            path = parent.path.empty() ? parent.last_key
                                       : parent.path + "." + parent.last_key;
          }
          frames.push_back({{}, path, {}});
        }
        if (event == json::parse_event_t::object_end) frames.pop_back();
        if (event == json::parse_event_t::key && !frames.empty()) {
          Frame& f = frames.back();
          f.last_key = parsed.get<std::string>();
          if (!f.keys.insert(f.last_key).second && duplicate.empty()) {
            duplicate = f.path.empty() ? f.last_key : f.path + "." + f.last_key;
          }
        }
        return true;
      };
  try {
    cfg.document = json::parse(text, check_duplicates, true, false);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ": invalid JSON: " + e.what());
  }
  if (!duplicate.empty()) throw cfg.error(duplicate, "duplicate key");
  const json& doc = cfg.document;
  if (!doc.is_object()) throw ConfigError(source_name + ": top level must be an object");
  reject_unknown(cfg, doc, "",
                 {"model", "extension", "integrator", "run", "output", "experiment"});

  const json& model = *section(cfg, doc, "model", true);
  reject_unknown(cfg, model, "model", {"n", "beta"});
  if (!model.contains("n")) throw cfg.error("model", "missing key n");
  if (!model.contains("beta")) throw cfg.error("model", "missing key beta");
  const auto n = read_integer(cfg, model, "model", "n");
  if (n < 1 || n > 4096) throw cfg.error("model.n", "must be in [1, 4096]");
  cfg.model.n = static_cast<int>(n);
  cfg.model.beta = read_real(cfg, model, "model", "beta");
  if (!(cfg.model.beta > 0.0)) {
    throw cfg.error("model.beta", "must be positive (got " + real_text(cfg.model.beta) + ")");
  }
  const ModelParams params(cfg.model.n, cfg.model.beta);

  cfg.extension.delta = 0.5 * ExtensionParams::max_delta(cfg.model.n);
  if (const json* ext = section(cfg, doc, "extension", false)) {
    reject_unknown(cfg, *ext, "extension", {"delta"});
    if (ext->contains("delta")) {
      cfg.extension.delta = read_real(cfg, *ext, "extension", "delta");
      const double hi = ExtensionParams::max_delta(cfg.model.n);
      if (!(cfg.extension.delta > 0.0 && cfg.extension.delta < hi)) {
        throw cfg.error("extension.delta",
                        "must lie in (0, " + real_text(hi) + ") for n = " +
                            std::to_string(cfg.model.n));
      }
    }
  }

  if (const json* integ = section(cfg, doc, "integrator", false)) {
    reject_unknown(cfg, *integ, "integrator", {"dt", "scheme", "min_gap", "drift_cap"});
    if (integ->contains("dt")) {
      cfg.integrator.dt = read_real(cfg, *integ, "integrator", "dt");
      if (!(cfg.integrator.dt > 0.0)) throw cfg.error("integrator.dt", "must be positive");
    }
    if (integ->contains("scheme")) {
      const json& s = integ->at("scheme");
      if (!s.is_string()) throw cfg.error("integrator.scheme", "must be a string");
      cfg.integrator.scheme = s.get<std::string>();
      try {
        parse_scheme(cfg.integrator.scheme);
      } catch (const std::invalid_argument& e) {
        throw cfg.error("integrator.scheme", e.what());
      }
    }
    if (integ->contains("min_gap")) {
      cfg.integrator.min_gap = read_real(cfg, *integ, "integrator", "min_gap");
      if (!(*cfg.integrator.min_gap >= 0.0)) {
        throw cfg.error("integrator.min_gap", "must be >= 0");
      }
    }
    if (integ->contains("drift_cap")) {
      if (integ->at("drift_cap").is_null()) {
        cfg.integrator.drift_cap_disabled = true;
      } else {
        cfg.integrator.drift_cap = read_real(cfg, *integ, "integrator", "drift_cap");
        if (!(*cfg.integrator.drift_cap > 0.0)) {
          throw cfg.error("integrator.drift_cap", "must be positive or null");
        }
      }
    }
  }

  if (const json* run = section(cfg, doc, "run", false)) {
    reject_unknown(cfg, *run, "run", {"t_end", "paths", "record_stride", "seed"});
    if (run->contains("t_end")) {
      cfg.run.t_end = read_real(cfg, *run, "run", "t_end");
      if (!(cfg.run.t_end > 0.0)) throw cfg.error("run.t_end", "must be positive");
    }
    if (run->contains("paths")) {
      const auto v = read_integer(cfg, *run, "run", "paths");
      if (v < 1) throw cfg.error("run.paths", "must be >= 1");
      cfg.run.paths = static_cast<std::uint64_t>(v);
    }
    if (run->contains("record_stride")) {
      const auto v = read_integer(cfg, *run, "run", "record_stride");
      if (v < 1) throw cfg.error("run.record_stride", "must be >= 1");
      cfg.run.record_stride = static_cast<std::uint64_t>(v);
    }
    if (run->contains("seed")) {
      const json& s = run->at("seed");
      if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() &&
                                     s.get<std::int64_t>() < 0)) {
        throw cfg.error("run.seed", "must be a non-negative integer");
      }
      cfg.run.seed = s.get<std::uint64_t>();
    }
  }

  if (const json* out = section(cfg, doc, "output", false)) {
    reject_unknown(cfg, *out, "output", {"directory", "formats"});
    if (out->contains("directory")) {
      const json& d = out->at("directory");
      if (!d.is_string() || d.get<std::string>().empty()) {
        throw cfg.error("output.directory", "must be a non-empty string");
      }
      cfg.output.directory = d.get<std::string>();
    }
    if (out->contains("formats")) {
      const json& f = out->at("formats");
      if (!f.is_array() || f.empty()) {
        throw cfg.error("output.formats", "must be a non-empty array");
      }
      cfg.output.formats.clear();
      for (const auto& v : f) {
        if (!v.is_string() || (v != "csv" && v != "json")) {
          throw cfg.error("output.formats", "entries must be \"csv\" or \"json\"");
        }
        cfg.output.formats.push_back(v.get<std::string>());
      }
    }
  }

  if (doc.contains("experiment")) {
    if (!doc.at("experiment").is_object()) {
      throw cfg.error("experiment", "must be an object");
    }
    cfg.experiment = doc.at("experiment");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

ExperimentReader::ExperimentReader(const ExperimentConfig& cfg,
                                   std::vector<std::string> allowed)
    : cfg_(cfg) {
  for (const auto& [key, value] : cfg.experiment.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw cfg.error("experiment." + key, "unknown key for this subcommand");
    }
  }
}

const json* ExperimentReader::find(const std::string& key) const {
  auto it = cfg_.experiment.find(key);
  return it == cfg_.experiment.end() ? nullptr : &*it;
}

bool ExperimentReader::has(const std::string& key) const { return find(key) != nullptr; }

double ExperimentReader::real(const std::string& key, double fallback) const {
  const json* v = find(key);
  if (!v) return fallback;
  if (!v->is_number() || !std::isfinite(v->get<double>())) {
    throw cfg_.error("experiment." + key, "must be a finite number");
  }
  return v->get<double>();
}

std::int64_t ExperimentReader::integer(const std::string& key,
                                       std::int64_t fallback) const {
  const json* v = find(key);
  if (!v) return fallback;
  if (!v->is_number_integer()) throw cfg_.error("experiment." + key, "must be an integer");
  return v->get<std::int64_t>();
}

bool ExperimentReader::boolean(const std::string& key, bool fallback) const {
  const json* v = find(key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw cfg_.error("experiment." + key, "must be true or false");
  return v->get<bool>();
}

std::string ExperimentReader::text(const std::string& key,
                                   const std::string& fallback) const {
  const json* v = find(key);
  if (!v) return fallback;
  if (!v->is_string()) throw cfg_.error("experiment." + key, "must be a string");
  return v->get<std::string>();
}

std::vector<double> ExperimentReader::reals(const std::string& key,
                                            const std::vector<double>& fallback) const {
  const json* v = find(key);
  if (!v) return fallback;
  if (!v->is_array() || v->empty()) {
    throw cfg_.error("experiment." + key, "must be a non-empty array of numbers");
  }
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number() || !std::isfinite(e.get<double>())) {
      throw cfg_.error("experiment." + key, "must be a non-empty array of numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::int64_t> ExperimentReader::integers(
    const std::string& key, const std::vector<std::int64_t>& fallback) const {
  const json* v = find(key);
  if (!v) return fallback;
  if (!v->is_array() || v->empty()) {
    throw cfg_.error("experiment." + key, "must be a non-empty array of integers");
  }
  std::vector<std::int64_t> out;
  for (const auto& e : *v) {
    if (!e.is_number_integer()) {
      throw cfg_.error("experiment." + key, "must be a non-empty array of integers");
    }
    out.push_back(e.get<std::int64_t>());
  }
  return out;
}

}  // namespace simplexbessel::cli
