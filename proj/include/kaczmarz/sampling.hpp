#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "kaczmarz/errors.hpp"

namespace kaczmarz {

// splitmix64 (Steele/Lea/Vigna): single 64-bit word of state advanced by the
// golden-ratio increment, output run through a shift/multiply finalizer.
// Equal seeds give identical output sequences on every platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  static std::uint64_t finalize_mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return finalize_mix(state_);
  }

  // Uniform over [0, bound) by widening multiply; bound must be positive.
  std::uint64_t next_below(std::uint64_t bound) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  // Uniform over [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
  std::uint64_t seed_;
};

// Seed for an independent stream: XOR-fold the base seed with an odd multiple
// of the stream index, then finalize. Used to hand each trial its own stream.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
  return RngStream::finalize_mix(base_seed ^ (index * 0x9e3779b97f4a7c15ULL));
}

inline RngStream derive_stream(std::uint64_t base_seed, std::uint64_t index) {
  return RngStream(derive_seed(base_seed, index));
}

// `count` indices drawn i.i.d. uniform from `pool`, with replacement.
inline std::vector<std::size_t> sample_uniform_indices(
    RngStream& rng, std::span<const std::size_t> pool, std::size_t count) {
  if (pool.empty()) throw EmptyPool("sample_uniform_indices: empty pool");
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = pool[rng.next_below(pool.size())];
  return out;
}

// Uniform value in [lo, hi).
inline double sample_real_uniform(RngStream& rng, double lo, double hi) {
  if (!(lo < hi))
    throw InvalidRange("sample_real_uniform: requires lo < hi, got [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + ")");
  double v = lo + (hi - lo) * rng.next_unit();
  if (v >= hi) v = std::nextafter(hi, lo);  // rounding can land exactly on hi
  return v;
}

// Fills `out` with i.i.d. standard normal values (Box-Muller on the stream).
inline void sample_gaussian(RngStream& rng, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); i += 2) {
    const double u1 = 1.0 - rng.next_unit();  // (0, 1], keeps log finite
    const double u2 = rng.next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.141592653589793238462643383279502884 * u2;
    out[i] = radius * std::cos(angle);
    if (i + 1 < out.size()) out[i + 1] = radius * std::sin(angle);
  }
}

// Lower q-quantile: the k-th smallest element with k = max(1, ceil(q * len)).
// Selection (introselect) rather than sorting, so the expected cost is linear.
inline double lower_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw EmptyInput("lower_quantile: empty input");
  if (!(q > 0.0 && q <= 1.0))
    throw QuantileOutOfRange("lower_quantile: q must lie in (0,1], got " +
                             std::to_string(q));
  std::size_t k = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(values.size())));
  k = std::clamp<std::size_t>(k, 1, values.size());
  std::vector<double> work(values.begin(), values.end());
  std::nth_element(work.begin(), work.begin() + (k - 1), work.end());
  return work[k - 1];
}

}  // namespace kaczmarz
