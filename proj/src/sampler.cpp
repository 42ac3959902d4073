#include "simplexbessel/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "simplexbessel/report.hpp"

namespace simplexbessel {

void draw_invariant(const ModelParams& p, RngStream& rng,
                    std::span<double> out) {
  const std::size_t n = out.size();
  const double shape = p.beta_prime();
  double gaps[65];
  std::vector<double> heap;
  double* g = gaps;
  if (n + 1 > 65) {
    heap.resize(n + 1);
    g = heap.data();
  }
  double total = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    g[i] = rng.gamma(shape);
    total += g[i];
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += g[i];
    out[i] = std::min(acc / total, 1.0);
  }
}

SampleBatch sample_invariant(const ModelParams& p, RngStream& rng,
                             std::size_t count) {
  if (count < 1) throw std::invalid_argument("sample_invariant: count < 1");
  SampleBatch batch{{}, p, rng};
  batch.points.reserve(count);
  std::vector<double> x(static_cast<std::size_t>(p.n()));
  for (std::size_t k = 0; k < count; ++k) {
    draw_invariant(p, rng, x);
    batch.points.push_back(SimplexPoint::trusted(x));
  }
  return batch;
}

SampleBatch sample_uniform_simplex(int n, RngStream& rng, std::size_t count) {
  if (count < 1) {
    throw std::invalid_argument("sample_uniform_simplex: count < 1");
  }
  ModelParams uniform(n, static_cast<double>(n + 1));
  SampleBatch batch{{}, uniform, rng};
  batch.points.reserve(count);
  std::vector<double> x(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < count; ++k) {
    for (auto& v : x) v = rng.uniform();
    std::sort(x.begin(), x.end());
    batch.points.push_back(SimplexPoint::trusted(x));
  }
  return batch;
}

std::vector<AmbientPoint> probe_points(int n, int d_target, std::size_t count,
                                       RngStream& rng) {
  if (n < 1 || d_target < 0 || d_target > n) {
    throw std::invalid_argument("probe_points: need 0 <= d_target <= n");
  }
  const int positive = n - d_target;
  const double slack = kProbeCeiling - kProbeSeparation * positive;
  if (slack < 0.0) {
    throw std::invalid_argument(
        "probe_points: too many positive gaps for the required separation");
  }
  std::vector<AmbientPoint> out;
  out.reserve(count);
  std::vector<int> slots(static_cast<std::size_t>(n));
  std::vector<double> folded(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < count; ++k) {
    // Partial Fisher-Yates: the first d_target slots get zero gaps.
    std::iota(slots.begin(), slots.end(), 0);
    for (int i = 0; i < d_target; ++i) {
      const int j = i + static_cast<int>(rng() % static_cast<std::uint64_t>(n - i));
      std::swap(slots[i], slots[j]);
    }
    std::vector<double> gaps(static_cast<std::size_t>(n), 0.0);
    for (int i = d_target; i < n; ++i) {
      gaps[slots[i]] = kProbeSeparation + rng.uniform() * slack / positive;
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += gaps[i];
      folded[i] = acc;
    }
    AmbientPoint y{folded};
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
      std::swap(y.coords[i], y.coords[j]);
    }
    for (auto& v : y.coords) {
      if (rng() & 1u) v = -v;
    }
    out.push_back(std::move(y));
  }
  return out;
}

void write_csv(std::ostream& os, const SampleBatch& batch) {
  const int n = batch.params.n();
  for (int i = 1; i <= n; ++i) {
    os << 'x' << i << (i == n ? '\n' : ',');
  }
  for (const auto& pt : batch.points) {
    for (std::size_t i = 0; i < pt.size(); ++i) {
      os << format_real(pt[i]) << (i + 1 == pt.size() ? '\n' : ',');
    }
  }
}

}  // namespace simplexbessel
