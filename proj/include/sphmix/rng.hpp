#pragma once

#include <cstdint>
#include <string_view>

namespace sphmix {

// Counter-based 64-bit generator: output i is a pure function of (key, i).
// Every randomized operation in the library receives an explicit stream (or
// a seed it derives streams from), so results never depend on evaluation
// order or thread count.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();

  // Uniform on [0, 1), 53-bit resolution.
  double uniform();
  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_open();
  // Unbiased integer on [0, n); n must be nonzero.
  std::uint64_t uniform_below(std::uint64_t n);
  // Standard normal via Box-Muller; draws two uniforms per pair, caches the
  // second value.
  double normal();
  // Gamma(shape, 1) for shape >= 1 (Marsaglia-Tsang squeeze method).
  double gamma(double shape);
  // Chi-square with df degrees of freedom (df >= 1).
  double chi_square(double df);

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(T* data, std::size_t n) {
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      T tmp = data[i - 1];
      data[i - 1] = data[j];
      data[j] = tmp;
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Stable stream-key derivation from a user seed, a stage tag, and optional
// indices. Same inputs give the same key on every platform.
std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag);
std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag,
                            std::uint64_t a);
std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag,
                            std::uint64_t a, std::uint64_t b);
std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag,
                            std::uint64_t a, std::uint64_t b, std::uint64_t c);

}  // namespace sphmix
