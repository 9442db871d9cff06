#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace fedsim {

// All randomness flows through this header so that every draw is a pure
// function of an explicit 64-bit seed. std::mt19937_64 raw output is fully
// specified by the standard; the distributions below are hand-rolled because
// std::uniform_*_distribution is implementation-defined.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Named sub-streams of the master seed. Data streams are deliberately
/// separate from training streams so partitions never depend on the strategy.
enum class SeedStream : std::uint64_t {
  kGenerate = 1,
  kSplit = 2,
  kUpsample = 3,
  kTrain = 4,
  kExtraEpoch = 5,
};

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = splitmix64(master ^ (static_cast<std::uint64_t>(stream) << 56));
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ b);
  return s;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double next_double() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_double() < p; }

  /// Unbiased uniform integer in [0, n), n >= 1. Rejection sampling.
  std::uint64_t next_below(std::uint64_t n) {
    const std::uint64_t threshold = -n % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  /// Fisher-Yates shuffle, deterministic given the seed.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace fedsim
