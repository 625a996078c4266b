#include "lgir/rng.hpp"

#include <cmath>
#include <numbers>

namespace lgir {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

// 53-bit uniform strictly inside (0, 1).
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t x = (static_cast<std::uint64_t>(hi) << 32) | lo;
  return (static_cast<double>(x >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kMul0, ctr[0], lo0, hi0);
    mulhilo(kMul1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
  const std::uint64_t k = splitmix64(splitmix64(seed) ^ stream);
  key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

PhiloxCounter CounterRng::block(RngPurpose purpose, std::uint32_t level, std::uint64_t index,
                                std::uint32_t pair) const {
  const std::uint32_t tag = (static_cast<std::uint32_t>(purpose) << 24) | (level & 0xFFFFFFu);
  return philox4x32_10({pair, static_cast<std::uint32_t>(index),
                        static_cast<std::uint32_t>(index >> 32), tag},
                       key_);
}

void CounterRng::normals(RngPurpose purpose, std::uint32_t level, std::uint64_t index, double* out,
                         int n) const {
  for (int pair = 0; 2 * pair < n; ++pair) {
    const PhiloxCounter r = block(purpose, level, index, static_cast<std::uint32_t>(pair));
    const double u1 = to_open_unit(r[0], r[1]);
    const double u2 = to_open_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[2 * pair] = radius * std::cos(angle);
    if (2 * pair + 1 < n) out[2 * pair + 1] = radius * std::sin(angle);
  }
}

void CounterRng::uniforms(RngPurpose purpose, std::uint32_t level, std::uint64_t index,
                          double* out, int n) const {
  for (int pair = 0; 2 * pair < n; ++pair) {
    const PhiloxCounter r = block(purpose, level, index, static_cast<std::uint32_t>(pair));
    out[2 * pair] = to_open_unit(r[0], r[1]);
    if (2 * pair + 1 < n) out[2 * pair + 1] = to_open_unit(r[2], r[3]);
  }
}

}  // namespace lgir
