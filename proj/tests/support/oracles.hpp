#pragma once

// Reference implementations used only by tests. Each is written as a naive,
// independent counterpart of a library routine (different algorithm where
// possible) so the two sides can be compared: a cyclic Jacobi eigensolver,
// double-loop statistics, quadratic single-linkage, closed-form normal
// quantities, exhaustive selection, and enumeration counters.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sphmix/linalg.hpp"
#include "sphmix/model.hpp"
#include "sphmix/rng.hpp"
#include "sphmix/scheffe.hpp"

namespace testsupport {

// ---------------------------------------------------------------------------
// Dense symmetric eigendecomposition by cyclic Jacobi rotations.

struct JacobiResult {
  std::vector<double> values;                 // descending by |value|
  std::vector<std::vector<double>> vectors;   // matching orthonormal vectors
};

inline JacobiResult jacobi_eigen(sphmix::Matrix m) {
  const std::size_t d = m.rows;
  if (d == 0 || m.cols != d) throw std::invalid_argument("jacobi: square only");
  sphmix::Matrix v = sphmix::Matrix::identity(d);
  double scale = 0.0;
  for (double x : m.a) scale += x * x;
  scale = std::sqrt(scale);
  const double stop = std::max(1e-300, 1e-15 * scale);
  for (int sweep = 0; sweep < 300; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) off += m.at(p, q) * m.at(p, q);
    }
    if (std::sqrt(2.0 * off) <= stop) break;
    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = m.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t r = 0; r < d; ++r) {
          const double mrp = m.at(r, p);
          const double mrq = m.at(r, q);
          m.at(r, p) = c * mrp - s * mrq;
          m.at(r, q) = s * mrp + c * mrq;
        }
        for (std::size_t r = 0; r < d; ++r) {
          const double mpr = m.at(p, r);
          const double mqr = m.at(q, r);
          m.at(p, r) = c * mpr - s * mqr;
          m.at(q, r) = s * mpr + c * mqr;
        }
        for (std::size_t r = 0; r < d; ++r) {
          const double vrp = v.at(r, p);
          const double vrq = v.at(r, q);
          v.at(r, p) = c * vrp - s * vrq;
          v.at(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&m](std::size_t a, std::size_t b) {
    const double fa = std::abs(m.at(a, a));
    const double fb = std::abs(m.at(b, b));
    if (fa != fb) return fa > fb;
    return m.at(a, a) > m.at(b, b);
  });
  JacobiResult out;
  for (std::size_t idx : order) {
    out.values.push_back(m.at(idx, idx));
    std::vector<double> col(d);
    for (std::size_t r = 0; r < d; ++r) col[r] = v.at(r, idx);
    // Sign convention: largest-magnitude entry positive.
    std::size_t arg = 0;
    for (std::size_t r = 1; r < d; ++r) {
      if (std::abs(col[r]) > std::abs(col[arg])) arg = r;
    }
    if (col[arg] < 0.0) {
      for (double& x : col) x = -x;
    }
    out.vectors.push_back(std::move(col));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Double-loop mean and centered scatter.

struct NaiveStats {
  std::size_t count = 0;
  std::vector<double> mean;
  std::vector<std::vector<double>> scatter;  // sum of outer products
};

inline NaiveStats naive_scatter(const sphmix::Dataset& data,
                                const std::vector<std::size_t>& rows);

inline NaiveStats naive_scatter(const std::vector<std::vector<double>>& pts) {
  if (pts.empty()) throw std::invalid_argument("naive_scatter: empty");
  const std::size_t d = pts[0].size();
  NaiveStats s;
  s.count = pts.size();
  s.mean.assign(d, 0.0);
  for (const auto& p : pts) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += p[j];
  }
  for (double& x : s.mean) x /= static_cast<double>(pts.size());
  s.scatter.assign(d, std::vector<double>(d, 0.0));
  for (const auto& p : pts) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        s.scatter[i][j] += (p[i] - s.mean[i]) * (p[j] - s.mean[j]);
      }
    }
  }
  return s;
}

inline NaiveStats naive_scatter(const sphmix::Dataset& data,
                                const std::vector<std::size_t>& rows) {
  std::vector<std::vector<double>> pts;
  pts.reserve(rows.size());
  for (std::size_t r : rows) {
    const double* row = data.row(r);
    pts.emplace_back(row, row + data.d);
  }
  return naive_scatter(pts);
}

// ---------------------------------------------------------------------------
// Quadratic agglomerative single linkage. Returns the partition as sorted
// index groups, groups ordered by their smallest index.

inline std::vector<std::vector<std::size_t>> canonical_partition(
    std::vector<std::vector<std::size_t>> groups) {
  for (auto& g : groups) std::sort(g.begin(), g.end());
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

// merge while min inter-cluster |v_a - v_b| <= threshold (1-D values).
inline std::vector<std::vector<std::size_t>> naive_single_linkage_1d(
    const std::vector<double>& values, double threshold) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < values.size(); ++i) groups.push_back({i});
  while (groups.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        for (std::size_t i : groups[a]) {
          for (std::size_t j : groups[b]) {
            const double dist = std::abs(values[i] - values[j]);
            if (dist < best) {
              best = dist;
              ba = a;
              bb = b;
            }
          }
        }
      }
    }
    if (!(best <= threshold)) break;
    groups[ba].insert(groups[ba].end(), groups[bb].begin(), groups[bb].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  return canonical_partition(std::move(groups));
}

// merge while min inter-cluster squared Euclidean distance <= threshold_sq.
inline std::vector<std::vector<std::size_t>> naive_single_linkage_sq(
    const sphmix::Dataset& data, double threshold_sq) {
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < data.n; ++i) groups.push_back({i});
  const auto dist_sq = [&data](std::size_t i, std::size_t j) {
    double s = 0.0;
    const double* a = data.row(i);
    const double* b = data.row(j);
    for (std::size_t t = 0; t < data.d; ++t) {
      const double diff = a[t] - b[t];
      s += diff * diff;
    }
    return s;
  };
  while (groups.size() > 1) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t ba = 0, bb = 0;
    for (std::size_t a = 0; a < groups.size(); ++a) {
      for (std::size_t b = a + 1; b < groups.size(); ++b) {
        for (std::size_t i : groups[a]) {
          for (std::size_t j : groups[b]) {
            const double dist = dist_sq(i, j);
            if (dist < best) {
              best = dist;
              ba = a;
              bb = b;
            }
          }
        }
      }
    }
    if (!(best <= threshold_sq)) break;
    groups[ba].insert(groups[ba].end(), groups[bb].begin(), groups[bb].end());
    groups.erase(groups.begin() + static_cast<std::ptrdiff_t>(bb));
  }
  return canonical_partition(std::move(groups));
}

// ---------------------------------------------------------------------------
// Closed-form normal quantities.

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// ||N(0,1) - N(1,1)||_1 = 2 (Phi(1/2) - Phi(-1/2)).
inline double l1_unit_shift() {
  return 2.0 * (normal_cdf(0.5) - normal_cdf(-0.5));
}

// ||N(0,1) - N(0,4)||_1 = 4 (Phi(a) - Phi(a/2)), a = 2 sqrt(ln 4 / 3),
// from the two density crossing points at +-a.
inline double l1_unit_vs_var4() {
  const double a = 2.0 * std::sqrt(std::log(4.0) / 3.0);
  return 4.0 * (normal_cdf(a) - normal_cdf(a / 2.0));
}

// ---------------------------------------------------------------------------
// Subspace comparison. Inputs are spanning sets (not necessarily
// orthonormal); returns the largest principal angle in radians. Requires
// equal ranks after orthonormalization.

inline std::vector<std::vector<double>> orthonormalize(
    std::vector<std::vector<double>> vs) {
  std::vector<std::vector<double>> basis;
  for (auto& v : vs) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t j = 0; j < v.size(); ++j) dot += v[j] * b[j];
        for (std::size_t j = 0; j < v.size(); ++j) v[j] -= dot * b[j];
      }
    }
    double nrm = 0.0;
    for (double x : v) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm > 1e-10) {
      for (double& x : v) x /= nrm;
      basis.push_back(std::move(v));
    }
  }
  return basis;
}

inline double max_principal_angle(std::vector<std::vector<double>> a,
                                  std::vector<std::vector<double>> b) {
  const auto qa = orthonormalize(std::move(a));
  const auto qb = orthonormalize(std::move(b));
  if (qa.size() != qb.size() || qa.empty()) {
    throw std::invalid_argument("principal angle: rank mismatch");
  }
  const std::size_t r = qa.size();
  // Smallest singular value of M = Qa^T Qb via the smallest eigenvalue of
  // M^T M (r x r, tiny).
  sphmix::Matrix mtm(r, r);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      double s = 0.0;
      for (std::size_t x = 0; x < r; ++x) {
        double mxi = 0.0, mxj = 0.0;
        for (std::size_t t = 0; t < qa[x].size(); ++t) {
          mxi += qa[x][t] * qb[i][t];
          mxj += qa[x][t] * qb[j][t];
        }
        s += mxi * mxj;
      }
      mtm.at(i, j) = s;
    }
  }
  const JacobiResult jr = jacobi_eigen(mtm);
  double lam_min = jr.values.front();
  for (double lam : jr.values) lam_min = std::min(lam_min, lam);
  const double sigma_min = std::sqrt(std::max(0.0, lam_min));
  return std::acos(std::clamp(sigma_min, 0.0, 1.0));
}

// ---------------------------------------------------------------------------
// Long-double direct summation of a 1-D mixture log density.

inline double direct_log_pdf_1d(const std::vector<double>& w,
                                const std::vector<double>& mu,
                                const std::vector<double>& var, double x) {
  long double s = 0.0L;
  for (std::size_t c = 0; c < w.size(); ++c) {
    const long double z =
        (static_cast<long double>(x) - mu[c]) * (x - mu[c]) / (2.0L * var[c]);
    s += static_cast<long double>(w[c]) * std::exp(-z) /
         std::sqrt(2.0L * 3.14159265358979323846264338327950288L * var[c]);
  }
  return static_cast<double>(std::log(s));
}

// ---------------------------------------------------------------------------
// Simple fixed-step Simpson integral of exp(log_pdf) for 1-D mixtures.

template <typename F>
double simpson_mass_1d(F&& f, double lo, double hi, std::size_t intervals) {
  if (intervals % 2 == 1) ++intervals;
  const double h = (hi - lo) / static_cast<double>(intervals);
  double s = f(lo) + f(hi);
  for (std::size_t i = 1; i < intervals; ++i) {
    s += f(lo + h * static_cast<double>(i)) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return s * h / 3.0;
}

inline double simpson_mass_1d(const sphmix::Mixture& m, double lo, double hi,
                              std::size_t intervals) {
  return simpson_mass_1d(
      [&m](double x) { return std::exp(m.log_pdf(&x)); }, lo, hi, intervals);
}

// ---------------------------------------------------------------------------
// Exhaustive selection: full round-robin over every candidate pair, most
// wins, ties to the lowest index. Usable up to a few dozen candidates.

struct ExhaustiveSelection {
  std::size_t winner_index = 0;
  std::size_t n_games = 0;
};

inline ExhaustiveSelection exhaustive_scheffe(
    const sphmix::CandidateFamily& family, const sphmix::Dataset& data,
    std::size_t n_mc, std::uint64_t seed) {
  const std::size_t f = family.size();
  std::vector<std::size_t> wins(f, 0);
  std::size_t games = 0;
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = i + 1; j < f; ++j) {
      const sphmix::GameRecord rec = sphmix::scheffe_pair(
          family.mixture(i), family.mixture(j), data, n_mc,
          sphmix::derive_stream(seed, "exhaustive", i, j), i, j);
      ++wins[rec.winner];
      ++games;
    }
  }
  ExhaustiveSelection out;
  out.n_games = games;
  for (std::size_t i = 1; i < f; ++i) {
    if (wins[i] > wins[out.winner_index]) out.winner_index = i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Enumeration counters.

// Number of k-tuples over a weight grid whose first k-1 entries come from
// the grid and whose remainder 1 - sum is >= -1e-9.
inline std::size_t count_weight_tuples(const std::vector<double>& grid,
                                       std::size_t k) {
  if (k == 1) return 1;
  std::size_t count = 0;
  std::vector<std::size_t> digit(k - 1, 0);
  while (true) {
    double sum = 0.0;
    for (std::size_t t = 0; t < k - 1; ++t) sum += grid[digit[t]];
    if (sum <= 1.0 + 1e-9) ++count;
    std::size_t pos = 0;
    while (pos < k - 1) {
      if (++digit[pos] < grid.size()) break;
      digit[pos] = 0;
      ++pos;
    }
    if (pos == k - 1) break;
  }
  return count;
}

// Game-count ceiling for the halving selection bracket.
inline std::size_t game_bound(std::size_t family_size) {
  if (family_size <= 1) return family_size == 0 ? 0 : 1;
  const double f = static_cast<double>(family_size);
  return static_cast<std::size_t>(
      std::ceil(f * (2.0 * std::log2(f) + 1.0)));
}

}  // namespace testsupport
