#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace tcl {

// Deterministic random source. std::mt19937_64 is fully specified by the
// standard, so it is used as the bit generator; the sampling algorithms on
// top of it are implemented here with fixed arithmetic because the std::
// distributions are implementation-defined and would break byte-for-byte
// reproducibility across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream derived from a master seed and a purpose label.
  Rng(std::uint64_t master_seed, std::string_view stream_label)
      : engine_(derive_seed(master_seed, stream_label)) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling keeps the draw unbiased.
  std::uint64_t uniform_int(std::uint64_t n);

  // Box-Muller without a cached spare, so the engine is the only state.
  double normal(double mean = 0.0, double sigma = 1.0);

  // Fisher-Yates, driven by uniform_int.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string save_state() const;
  void restore_state(const std::string& state);

  static std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

 private:
  std::mt19937_64 engine_;
};

// FNV-1a, used for stream labels and config fingerprints.
std::uint64_t fnv1a64(std::string_view s);

// SplitMix64 step; decorrelates nearby seed values.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace tcl
