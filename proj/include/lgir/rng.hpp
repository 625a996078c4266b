#pragma once

#include <array>
#include <cstdint>

namespace lgir {

// Philox4x32-10 counter-based generator: a pure function of (counter, key).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key);

std::uint64_t splitmix64(std::uint64_t x);

// What a block of random numbers is used for; keeps unrelated draws disjoint.
enum class RngPurpose : std::uint32_t {
  Increment = 1,   // base-level Brownian increments
  Bridge = 2,      // Brownian-bridge midpoints for refinement
  Initial = 3,     // initial-state draws
  Schedule = 4,    // randomized midpoint times
  Auxiliary = 5,   // extra normals for exact reference flows
};

// Deterministic source of standard normals addressed by
// (seed, stream, purpose, level, index, pair).  Each address yields two
// normals via Box-Muller on one Philox block.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  // Fills out[0..n) with standard normals for the given address.
  void normals(RngPurpose purpose, std::uint32_t level, std::uint64_t index, double* out,
               int n) const;
  // Uniforms in the open interval (0, 1).
  void uniforms(RngPurpose purpose, std::uint32_t level, std::uint64_t index, double* out,
                int n) const;

 private:
  PhiloxCounter block(RngPurpose purpose, std::uint32_t level, std::uint64_t index,
                      std::uint32_t pair) const;

  std::uint64_t seed_;
  std::uint64_t stream_;
  PhiloxKey key_;
};

}  // namespace lgir
