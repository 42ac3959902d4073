#include "simplexbessel/report.hpp"

#include <cmath>
#include <cstdio>

namespace simplexbessel {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json json_real(double v) {
  if (std::isfinite(v)) return v;
  return format_real(v);
}

nlohmann::json EstimatorReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["params"] = params;
  j["estimate"] = json_real(estimate);
  j["stderr"] = json_real(stderr_);
  j["budget"] = budget;
  j["seed"] = seed;
  j["flags"] = flags;
  if (!extra.empty()) j["details"] = extra;
  return j;
}

}  // namespace simplexbessel
