#include "sphmix/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace sphmix {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// SplitMix64 finalizer; full-period bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

std::uint64_t absorb(std::uint64_t h, std::uint64_t x) {
  return mix64(h ^ (x + kGolden + (h << 6) + (h >> 2)));
}

std::uint64_t absorb_tag(std::uint64_t h, std::string_view tag) {
  for (unsigned char ch : tag) h = absorb(h, ch);
  return h;
}

}  // namespace

std::uint64_t RngStream::next_u64() {
  counter_ += kGolden;
  return mix64(key_ + counter_);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform_open() {
  return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_below: n must be nonzero");
  // Modulo rejection; acceptance region is the largest multiple of n.
  const std::uint64_t limit = n * (~0ULL / n);
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 6.283185307179586476925286766559 * u2;
  cached_normal_ = r * std::sin(t);
  has_cached_normal_ = true;
  return r * std::cos(t);
}

double RngStream::gamma(double shape) {
  if (!(shape >= 1.0)) throw std::invalid_argument("gamma: shape must be >= 1");
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_open();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double RngStream::chi_square(double df) {
  if (!(df >= 1.0)) throw std::invalid_argument("chi_square: df must be >= 1");
  if (df >= 2.0) return 2.0 * gamma(0.5 * df);
  // df in [1, 2): chi2(df) = chi2(df + 2) * U^{2/df} (shape augmentation).
  const double g = 2.0 * gamma(0.5 * df + 1.0);
  return g * std::pow(uniform_open(), 2.0 / df);
}

std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag) {
  return absorb_tag(mix64(seed + kGolden), tag);
}

std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag,
                            std::uint64_t a) {
  return absorb(derive_stream(seed, tag), a);
}

std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag,
                            std::uint64_t a, std::uint64_t b) {
  return absorb(absorb(derive_stream(seed, tag), a), b);
}

std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag,
                            std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return absorb(absorb(absorb(derive_stream(seed, tag), a), b), c);
}

}  // namespace sphmix
