#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sphmix/model.hpp"

namespace sphmix {

// Dense row-major matrix; only square symmetric use matters here.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
  double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

// Count, mean, and centered scatter (sum of outer products around the mean,
// not divided by count) of a point set.
struct ScatterStats {
  std::size_t count = 0;
  std::vector<double> mean;  // d
  Matrix scatter;            // d x d
};

// Two-pass statistics over the listed rows (in the given order).
ScatterStats accumulate(const Dataset& data,
                        const std::vector<std::size_t>& rows);

// Exact combination law:
//   count = nA + nB
//   mean  = (nA muA + nB muB) / count
//   scatter = SA + SB + (nA nB / count) * delta delta^T,  delta = muB - muA.
ScatterStats merge(const ScatterStats& a, const ScatterStats& b);

// scatter / count - sigma2 * I. Requires count >= 2.
Matrix centered_covariance(const ScatterStats& stats, double sigma2);

struct EigPair {
  double value = 0.0;
  std::vector<double> vector;
};

// Raised when power iteration fails the residual contract within the
// iteration budget; carries the best iterate found.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(std::string what, EigPair best, double residual,
                      std::size_t iterations)
      : std::runtime_error(std::move(what)),
        best_(std::move(best)),
        residual_(residual),
        iterations_(iterations) {}
  const EigPair& best() const { return best_; }
  double residual() const { return residual_; }
  std::size_t iterations() const { return iterations_; }

 private:
  EigPair best_;
  double residual_;
  std::size_t iterations_;
};

// Top r eigenpairs of a symmetric matrix, ordered by descending |lambda|
// (ties broken toward the positive eigenvalue). Power iteration with
// explicit deflation; each extraction runs one pass shifted upward and one
// shifted downward so sign-dominant eigenvalues on either side are found.
//
// Contract on every returned pair: ||M v - lambda v||_2 <= tol * max(1, |lambda|).
// Eigenvector signs are fixed so the entry of largest magnitude is positive.
// Start vectors come from `seed`; identical inputs give identical output.
// tol <= 0 selects 1e-8; max_iter == 0 selects 10 * d * log(d + 1) + 500.
std::vector<EigPair> top_eigs(const Matrix& m, std::size_t r, double tol = 0.0,
                              std::size_t max_iter = 0, std::uint64_t seed = 1);

// max(|lambda_max|, |lambda_min|) via the same two shifted passes.
double spectral_norm(const Matrix& m, double tol = 0.0,
                     std::size_t max_iter = 0, std::uint64_t seed = 1);

// Iteration budget for covariance matrices of sampled data: their bulk
// eigenvalues sit a noise-level spacing apart, so the non-dominant pass
// converges at a ratio like 1 - spacing / spread and can need tens of
// thousands of iterations. Still well under a second at the dimensions
// this library targets; the small default suits well-separated spectra.
inline constexpr std::size_t kNoisySpectrumMaxIter = 400000;

}  // namespace sphmix
