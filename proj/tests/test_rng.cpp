#include <doctest.h>

#include <cmath>
#include <vector>

#include "lgir/rng.hpp"

using namespace lgir;

TEST_CASE("philox4x32-10 reproduces the published known-answer vectors") {
  {
    const auto out = philox4x32_10({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(out == PhiloxCounter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  }
  {
    const auto out = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                   {0xffffffffu, 0xffffffffu});
    CHECK(out == PhiloxCounter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  }
  {
    const auto out = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                   {0xa4093822u, 0x299f31d0u});
    CHECK(out == PhiloxCounter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
  }
}

TEST_CASE("counter rng is a pure function of its address") {
  const CounterRng a(42, 7), b(42, 7);
  std::vector<double> x(9), y(9);
  a.normals(RngPurpose::Increment, 0, 123, x.data(), 9);
  b.normals(RngPurpose::Increment, 0, 123, y.data(), 9);
  CHECK(x == y);

  // A different purpose, level or index gives different numbers.
  b.normals(RngPurpose::Bridge, 0, 123, y.data(), 9);
  CHECK(x != y);
  b.normals(RngPurpose::Increment, 1, 123, y.data(), 9);
  CHECK(x != y);
  b.normals(RngPurpose::Increment, 0, 124, y.data(), 9);
  CHECK(x != y);
}

TEST_CASE("normals have unit variance and uniforms lie in the open unit interval") {
  const CounterRng rng(1, 2);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  double v[2];
  for (int i = 0; i < n / 2; ++i) {
    rng.normals(RngPurpose::Auxiliary, 0, static_cast<std::uint64_t>(i), v, 2);
    for (double z : v) {
      sum += z;
      sq += z * z;
    }
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  // Var of the sample variance of normals is 2/n.
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));

  double u[4];
  for (int i = 0; i < 10000; ++i) {
    rng.uniforms(RngPurpose::Schedule, 0, static_cast<std::uint64_t>(i), u, 4);
    for (double w : u) {
      CHECK(w > 0.0);
      CHECK(w < 1.0);
    }
  }
}

TEST_CASE("splitmix64 mixes neighbouring inputs") {
  CHECK(splitmix64(0) != splitmix64(1));
  CHECK(splitmix64(1) == splitmix64(1));
}
