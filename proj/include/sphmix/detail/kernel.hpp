#pragma once

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

// Internal evaluation kernel for density comparisons between spherical
// candidates whose component means lie in a shared low-dimensional affine
// subspace. A data point x is reduced once to features (c, r2) with
// c = Q^T (x - o) and r2 = ||x - o||^2 - ||c||^2; for any candidate mean
// o + Q g and isotropic variance v, ||x - mean||^2 = ||c - g||^2 + r2, so
// the full d-dimensional log density is recoverable from m + 1 numbers.

namespace sphmix::detail {

inline constexpr int kMaxKernelK = 4;  // mixture components per candidate
inline constexpr int kMaxKernelM = 8;  // affine feature dimensions

// exp(x) constants shared by the scalar routine below and its vectorized
// twin in kernel.cpp; the two must stay operation-for-operation identical
// (same fused multiply-adds in the same order), so change them together.
inline constexpr double kExpLog2e = 1.4426950408889634073599246810019;
inline constexpr double kExpLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kExpLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kExpShift = 0x1.8p52;  // rounds |z| < 2^51 into
                                               // the mantissa
// Taylor coefficients of exp at 0, degree 11 first (Horner order).
inline constexpr double kExpPoly[12] = {
    2.5052108385441718775e-08, 2.7557319223985890653e-07,
    2.7557319223985892511e-06, 2.4801587301587301566e-05,
    1.9841269841269841253e-04, 1.3888888888888889419e-03,
    8.3333333333333332177e-03, 4.1666666666666664354e-02,
    1.6666666666666665741e-01, 5.0e-01,
    1.0,                       1.0};

// exp(x) for x in [-708, 708], saturating outside (0 below, exp(708)
// above); inputs must not be NaN, -inf is allowed and yields 0. Max
// relative error ~1e-14 on the domain. Branch-free arithmetic with
// explicit fused multiply-adds; assumes round-to-nearest FP mode (never
// changed in this codebase).
inline double fast_exp(double x) {
  const bool underflow = x < -708.0;
  const double xc = x < -708.0 ? -708.0 : (x > 708.0 ? 708.0 : x);
  const double z = xc * kExpLog2e;
  const double shifted = z + kExpShift;
  const double kd = shifted - kExpShift;  // nearbyint(z)
  double r = std::fma(-kd, kExpLn2Hi, xc);
  r = std::fma(-kd, kExpLn2Lo, r);
  double p = kExpPoly[0];
  for (int i = 1; i < 12; ++i) p = std::fma(p, r, kExpPoly[i]);
  // 2^k via direct exponent-field construction; the mantissa of `shifted`
  // carries k + 2^51, whose low bits survive the shift unchanged.
  const auto ki = std::bit_cast<std::uint64_t>(shifted);
  const double scale = std::bit_cast<double>((ki + 1023u) << 52);
  const double out = p * scale;
  return underflow ? 0.0 : out;
}

// Reduced data rows stored column-major: one plane of length `cap` per
// feature coordinate, then one plane holding the orthogonal squared
// residual r2. The layout lets the comparison kernel stream four rows per
// vector lane. For plain 1-D data use m = 1, coordinate = x, r2 = 0.
struct FeatureRows {
  std::size_t n = 0;    // rows currently stored
  std::size_t cap = 0;  // plane stride (rows of storage)
  int m = 1;
  std::vector<double> data;  // (m + 1) planes of length cap

  const double* plane(int j) const {
    return data.data() + static_cast<std::size_t>(j) * cap;
  }
  double at(std::size_t i, int j) const { return plane(j)[i]; }

  static FeatureRows with_capacity(int m, std::size_t n_rows) {
    FeatureRows r;
    r.reset(m, n_rows);
    return r;
  }
  // Reshape to m feature planes with room for n_rows and empty the row
  // set; storage is reused when the shape repeats.
  void reset(int m_new, std::size_t n_rows) {
    m = m_new;
    cap = n_rows;
    n = 0;
    data.resize((static_cast<std::size_t>(m_new) + 1) * n_rows);
  }
  void push_row(const double* coords, double r2) {
    if (n == cap) throw std::logic_error("FeatureRows: capacity exceeded");
    for (int j = 0; j < m; ++j) {
      data[static_cast<std::size_t>(j) * cap + n] = coords[j];
    }
    data[static_cast<std::size_t>(m) * cap + n] = r2;
    ++n;
  }
};

// One spherical component in feature space. Log term at row (c, r2):
//   base - iv * (r2 + ||c - g||^2)
// with base = log(weight) - (d/2) log(2 pi v) for the *ambient* dimension
// d and iv = 1 / (2 v). Zero weights give base = -inf and drop out.
struct KernelComponent {
  double base = 0.0;
  double iv = 0.0;
  double g[kMaxKernelM] = {};
};

struct KernelCandidate {
  int k = 0;
  KernelComponent comp[kMaxKernelK];
};

// Number of rows where candidate p has strictly larger density than q.
// Each row is evaluated with one fixed arithmetic sequence regardless of
// which internal path (vector lane or scalar tail) processed it, so the
// count depends only on the row multiset and the candidates.
std::size_t count_first_gt(const FeatureRows& rows, const KernelCandidate& p,
                           const KernelCandidate& q);

// Log density of one candidate at one contiguous row of m coordinates
// followed by r2 (same math as above, library exp/log); matches
// Mixture::log_pdf when the reduction assumptions hold. Used for
// cross-checks in tests and for small one-off evaluations.
double kernel_log_pdf(const KernelCandidate& cand, const double* row, int m);

}  // namespace sphmix::detail
