#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace predbio {

/// 64-bit FNV-1a hash, used to derive per-record seeds from string ids.
std::uint64_t hash_string(std::string_view text) noexcept;

/// Mixes two 64-bit words with the splitmix64 finalizer.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

/// Deterministic random source. The engine output sequence is fixed by the
/// standard, and the distributions below are implemented here rather than
/// taken from <random>, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream for (seed, id, purpose).
  static Rng stream(std::uint64_t seed, std::string_view id, std::string_view purpose);

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = index(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace predbio
