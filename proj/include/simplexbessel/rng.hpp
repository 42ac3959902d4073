#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace simplexbessel {

namespace detail {
/// One Philox4x32-10 block.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);
}  // namespace detail

/// Counter-based random stream (Philox4x32-10). The 64-bit seed is the key,
/// the counter is (block index, stream_id), so every (seed, stream_id) pair
/// names an independent, reproducible sequence and workers never need to
/// coordinate.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  /// A stream with the same seed and a different id.
  RngStream substream(std::uint64_t stream_id) const noexcept {
    return RngStream(seed_, stream_id);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() noexcept;

  /// Uniform on the open interval (0, 1), 53 random bits.
  double uniform() noexcept;
  /// Standard normal (Box-Muller, second variate cached).
  double normal() noexcept;
  /// Gamma(shape, 1). Marsaglia-Tsang; shapes below one are boosted to
  /// shape + 1 and multiplied by U^{1/shape}.
  double gamma(double shape) noexcept;

 private:
  void refill() noexcept;

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> block_{};
  int next_ = 2;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace simplexbessel
