#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace simplexbessel::cli {

/// Invalid configuration. The message names the file, line and field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSection {
  int n = 0;
  double beta = 0.0;
};

struct ExtensionSection {
  /// Defaults to half the admissible maximum.
  double delta = 0.0;
};

struct IntegratorSection {
  double dt = 1e-4;
  std::string scheme = "fold_em";
  /// Absent: defaults derived from dt.
  std::optional<double> min_gap;
  /// Absent: default cap. Explicit null: no cap.
  std::optional<double> drift_cap;
  bool drift_cap_disabled = false;
};

struct RunSection {
  double t_end = 1.0;
  std::uint64_t paths = 1000;
  std::uint64_t record_stride = 1;
  std::uint64_t seed = 0;
};

struct OutputSection {
  std::string directory = "out";
  std::vector<std::string> formats = {"csv", "json"};
  bool wants(const std::string& format) const;
};

/// Parsed and validated experiment document.
struct ExperimentConfig {
  ModelSection model;
  ExtensionSection extension;
  IntegratorSection integrator;
  RunSection run;
  OutputSection output;
  /// Subcommand-specific keys, checked by the subcommand.
  nlohmann::json experiment = nlohmann::json::object();
  /// The document as parsed, echoed into manifests.
  nlohmann::json document;
  std::string source_name;
  std::string source_text;

  /// ConfigError for `field` (dotted path) with the line it appears on.
  ConfigError error(const std::string& field, const std::string& message) const;
};

/// Strict JSON: no comments, no duplicate or unknown keys. Every model
/// invariant is checked here.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// 1-based line of the dotted field in the source text, 0 when not found.
int locate_field(const std::string& text, const std::string& dotted);

/// Typed access to the experiment section with defaults.
class ExperimentReader {
 public:
  ExperimentReader(const ExperimentConfig& cfg, std::vector<std::string> allowed);

  bool has(const std::string& key) const;
  double real(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::vector<double> reals(const std::string& key,
                            const std::vector<double>& fallback) const;
  std::vector<std::int64_t> integers(
      const std::string& key, const std::vector<std::int64_t>& fallback) const;

 private:
  const nlohmann::json* find(const std::string& key) const;
  const ExperimentConfig& cfg_;
};

struct RunContext {
  ExperimentConfig config;
  std::filesystem::path out_dir;
  unsigned workers = 1;
};

const std::vector<std::string>& command_names();

/// Runs one subcommand. Throws ConfigError for configuration problems and
/// any other exception for runtime failures.
void run_command(const std::string& name, const RunContext& ctx);

/// Entry point. Returns the process exit code: 0 success, 1 runtime or
/// estimator failure, 2 configuration error.
int main_entry(int argc, char** argv);

}  // namespace simplexbessel::cli
