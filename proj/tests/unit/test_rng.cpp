#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "simplexbessel/rng.hpp"

using namespace simplexbessel;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using detail::philox4x32_10;
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) ==
        A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                      {0xffffffffu, 0xffffffffu}) ==
        A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                      {0xa4093822u, 0x299f31d0u}) ==
        A4{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::vector<std::uint64_t> va, vb, vc, vd;
  for (int i = 0; i < 100; ++i) {
    va.push_back(a());
    vb.push_back(b());
    vc.push_back(c());
    vd.push_back(d());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
  CHECK(std::set<std::uint64_t>(va.begin(), va.end()).size() == va.size());
  CHECK(a.substream(8).stream_id() == 8);
  CHECK(a.substream(8).seed() == 42);
}

TEST_CASE("uniform lies in the open unit interval with the right moments") {
  RngStream r(1, 0);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    s += u;
    s2 += u * u;
  }
  const double mean = s / n;
  CHECK(std::abs(mean - 0.5) < 3 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(s2 / n - mean * mean - 1.0 / 12) < 1e-3);
}

TEST_CASE("normal moments") {
  RngStream r(2, 0);
  const int n = 200000;
  double s = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    s4 += z * z * z * z;
  }
  CHECK(std::abs(s / n) < 3 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1) < 3 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3) < 3 * std::sqrt(96.0 / n));
}

TEST_CASE("gamma moments across the boost threshold") {
  for (double shape : {0.2, 0.5, 1.0, 2.5, 7.0}) {
    RngStream r(3, static_cast<std::uint64_t>(shape * 10));
    const int n = 200000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
      const double g = r.gamma(shape);
      REQUIRE(g >= 0.0);
      s += g;
      s2 += g * g;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    // Gamma(k, 1): mean k, variance k, fourth central moment 3k^2 + 6k.
    CHECK(std::abs(mean - shape) < 3 * std::sqrt(shape / n));
    const double var_se = std::sqrt((3 * shape * shape + 6 * shape - shape * shape) / n);
    CHECK(std::abs(var - shape) < 3.5 * var_se);
  }
}
