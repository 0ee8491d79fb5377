#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace divergen {

// All randomness in the project flows from one root seed through named
// streams (init / shuffle / noise / synth), so independent stages can be
// reseeded without coupling. Value mappings are hand-rolled on top of
// mt19937_64 raw output; std::*_distribution is implementation-defined
// and would break bit-reproducibility across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Standard normal via Box-Muller; caches the paired draw.
  double next_gauss();

  // Uniform integer in [0, n) by rejection; n must be > 0.
  std::uint64_t next_below(std::uint64_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable seed for a named substream of `root`.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream);

// Stable seed for the `index`-th element of a named substream.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                          std::uint64_t index);

}  // namespace divergen
