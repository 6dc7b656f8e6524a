#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Dense>

namespace geomala {

/// Philox4x32-10 counter-based engine (Salmon et al., SC'11).
///
/// The 64-bit key selects an independent stream; the 128-bit counter is
/// advanced once per block of four outputs. Distinct keys give
/// statistically independent streams, which is how per-chain streams are
/// derived from a single experiment seed.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;

  explicit Philox4x32(std::uint64_t key = 0, std::uint64_t counter_hi = 0)
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)},
        counter_{0, 0, static_cast<std::uint32_t>(counter_hi),
                 static_cast<std::uint32_t>(counter_hi >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (index_ == 4) {
      block_ = generate_block(counter_, key_);
      increment();
      index_ = 0;
    }
    return block_[index_++];
  }

  void discard(unsigned long long n) {
    for (; n > 0; --n) (*this)();
  }

  static std::array<std::uint32_t, 4> generate_block(std::array<std::uint32_t, 4> ctr,
                                                     std::array<std::uint32_t, 2> key);

 private:
  void increment() {
    for (auto& word : counter_) {
      if (++word != 0) break;
    }
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> block_{};
  int index_ = 4;
};

/// Per-chain source of randomness: uniform and standard normal draws.
///
/// Stream (seed, chain) is keyed by a SplitMix64 hash of both values, so
/// chain c of one experiment never overlaps chain c' or another seed.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t chain = 0);

  double uniform();          // in [0, 1)
  double normal();           // N(0, 1)
  Eigen::VectorXd normal_vector(Eigen::Index n);

  /// A child stream for sub-task `index`; independent of this stream.
  RandomStream split(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t chain() const { return chain_; }

 private:
  std::uint64_t seed_;
  std::uint64_t chain_;
  Philox4x32 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace geomala
