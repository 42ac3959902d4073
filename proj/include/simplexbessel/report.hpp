#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace simplexbessel {

/// 17 significant digits, C locale. Non-finite values print as inf, -inf
/// or nan.
std::string format_real(double v);

/// JSON value for a real; non-finite values become the strings "inf",
/// "-inf" and "nan" because JSON numbers cannot carry them.
nlohmann::json json_real(double v);

/// Uniform record emitted by every estimator.
struct EstimatorReport {
  std::string name;
  nlohmann::json params = nlohmann::json::object();
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t budget = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> flags;
  /// Estimator-specific payload (per-level values, verdicts, ...).
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
};

}  // namespace simplexbessel
