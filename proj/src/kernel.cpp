#include "sphmix/detail/kernel.hpp"

#include <cmath>
#include <limits>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#endif

namespace sphmix::detail {

namespace {

// Scalar evaluation of one row, used for whole datasets on machines
// without AVX2 and for the tail rows of the vector loop. Mirrors the
// vector lane operation for operation — same fused multiply-adds in the
// same order — so a row's comparison outcome never depends on which path
// handled it.
bool row_first_gt(const FeatureRows& rows, const KernelCandidate& p,
                  const KernelCandidate& q, std::size_t i) {
  const int m = rows.m;
  const double r2 = rows.plane(m)[i];
  double t[2 * kMaxKernelK];
  double mx = -std::numeric_limits<double>::infinity();
  int nt = 0;
  for (const KernelCandidate* cand : {&p, &q}) {
    for (int c = 0; c < cand->k; ++c) {
      const KernelComponent& kc = cand->comp[c];
      double acc = r2;
      for (int j = 0; j < m; ++j) {
        const double dj = rows.plane(j)[i] - kc.g[j];
        acc = std::fma(dj, dj, acc);
      }
      const double tc = std::fma(-kc.iv, acc, kc.base);
      t[nt++] = tc;
      mx = tc > mx ? tc : mx;
    }
  }
  // mx is finite: every candidate has at least one positive-weight
  // component, and rows are finite.
  double sp = 0.0;
  for (int c = 0; c < p.k; ++c) sp += fast_exp(t[c] - mx);
  double sq = 0.0;
  for (int c = 0; c < q.k; ++c) sq += fast_exp(t[p.k + c] - mx);
  return sp > sq;
}

#if defined(__AVX2__) && defined(__FMA__)

// Vector twin of fast_exp: identical constants and operation order, four
// lanes at a time. _mm256_fmadd_pd rounds once per lane exactly like
// std::fma, so each lane reproduces the scalar result bit for bit.
__m256d exp4(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(708.0);
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);
  const __m256d z = _mm256_mul_pd(xc, _mm256_set1_pd(kExpLog2e));
  const __m256d sh = _mm256_set1_pd(kExpShift);
  const __m256d shifted = _mm256_add_pd(z, sh);
  const __m256d kd = _mm256_sub_pd(shifted, sh);
  __m256d r = _mm256_fnmadd_pd(kd, _mm256_set1_pd(kExpLn2Hi), xc);
  r = _mm256_fnmadd_pd(kd, _mm256_set1_pd(kExpLn2Lo), r);
  __m256d p = _mm256_set1_pd(kExpPoly[0]);
  for (int i = 1; i < 12; ++i) {
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kExpPoly[i]));
  }
  const __m256i ki = _mm256_castpd_si256(shifted);
  const __m256i scale_bits =
      _mm256_slli_epi64(_mm256_add_epi64(ki, _mm256_set1_epi64x(1023)), 52);
  const __m256d out = _mm256_mul_pd(p, _mm256_castsi256_pd(scale_bits));
  return _mm256_andnot_pd(under, out);
}

// Processes rows [0, i_end) four at a time, returning the count and the
// first unprocessed row index (n rounded down to a multiple of four).
std::size_t count_first_gt_avx2(const FeatureRows& rows,
                                const KernelCandidate& p,
                                const KernelCandidate& q,
                                std::size_t& i_end) {
  const int m = rows.m;
  const std::size_t n = rows.n;
  const double* planes[kMaxKernelM + 1];
  for (int j = 0; j <= m; ++j) planes[j] = rows.plane(j);

  // Broadcast candidate constants once, p components then q components.
  const int nt = p.k + q.k;
  __m256d base_v[2 * kMaxKernelK];
  __m256d iv_v[2 * kMaxKernelK];
  __m256d g_v[2 * kMaxKernelK][kMaxKernelM];
  {
    int c_out = 0;
    for (const KernelCandidate* cand : {&p, &q}) {
      for (int c = 0; c < cand->k; ++c, ++c_out) {
        const KernelComponent& kc = cand->comp[c];
        base_v[c_out] = _mm256_set1_pd(kc.base);
        iv_v[c_out] = _mm256_set1_pd(kc.iv);
        for (int j = 0; j < m; ++j) g_v[c_out][j] = _mm256_set1_pd(kc.g[j]);
      }
    }
  }

  const __m256d ninf =
      _mm256_set1_pd(-std::numeric_limits<double>::infinity());
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r2 = _mm256_loadu_pd(planes[m] + i);
    __m256d terms[2 * kMaxKernelK];
    __m256d mx = ninf;
    for (int c = 0; c < nt; ++c) {
      __m256d acc = r2;
      for (int j = 0; j < m; ++j) {
        const __m256d dj =
            _mm256_sub_pd(_mm256_loadu_pd(planes[j] + i), g_v[c][j]);
        acc = _mm256_fmadd_pd(dj, dj, acc);
      }
      const __m256d tc = _mm256_fnmadd_pd(iv_v[c], acc, base_v[c]);
      terms[c] = tc;
      mx = _mm256_max_pd(mx, tc);
    }
    __m256d sp = _mm256_setzero_pd();
    for (int c = 0; c < p.k; ++c) {
      sp = _mm256_add_pd(sp, exp4(_mm256_sub_pd(terms[c], mx)));
    }
    __m256d sq = _mm256_setzero_pd();
    for (int c = 0; c < q.k; ++c) {
      sq = _mm256_add_pd(sq, exp4(_mm256_sub_pd(terms[p.k + c], mx)));
    }
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(sp, sq, _CMP_GT_OQ));
    count += static_cast<unsigned>(__builtin_popcount(static_cast<unsigned>(mask)));
  }
  i_end = i;
  return count;
}

#endif  // __AVX2__ && __FMA__

}  // namespace

std::size_t count_first_gt(const FeatureRows& rows, const KernelCandidate& p,
                           const KernelCandidate& q) {
  std::size_t count = 0;
  std::size_t i = 0;
#if defined(__AVX2__) && defined(__FMA__)
  count = count_first_gt_avx2(rows, p, q, i);
#endif
  for (; i < rows.n; ++i) {
    if (row_first_gt(rows, p, q, i)) ++count;
  }
  return count;
}

double kernel_log_pdf(const KernelCandidate& cand, const double* row, int m) {
  const double r2 = row[m];
  double terms[kMaxKernelK];
  double mx = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < cand.k; ++c) {
    const KernelComponent& kc = cand.comp[c];
    double acc = r2;
    for (int j = 0; j < m; ++j) {
      const double dj = row[j] - kc.g[j];
      acc += dj * dj;
    }
    terms[c] = kc.base - kc.iv * acc;
    mx = std::max(mx, terms[c]);
  }
  if (!(mx > -std::numeric_limits<double>::infinity())) {
    return -std::numeric_limits<double>::infinity();
  }
  double s = 0.0;
  for (int c = 0; c < cand.k; ++c) s += std::exp(terms[c] - mx);
  return mx + std::log(s);
}

}  // namespace sphmix::detail
