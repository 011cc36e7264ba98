#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace mfband {

// Platform-stable random stream. Only the raw engine output of
// std::mt19937_64 is used (its sequence is fixed by the standard); uniform,
// integer and Gaussian draws are derived here instead of through the
// implementation-defined std distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  // Uniform integer in [0, n), unbiased by rejection.
  std::size_t below(std::size_t n);
  // Standard normal by inversion of the CDF.
  double normal();

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Standard normal quantile function.
double normal_quantile(double u);

}  // namespace mfband
