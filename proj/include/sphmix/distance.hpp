#pragma once

#include <cstdint>
#include <vector>

#include "sphmix/model.hpp"

namespace sphmix {

struct L1Estimate {
  double value = 0.0;      // clamped to [0, 2]
  double std_error = 0.0;  // jackknife standard error of the mean
  std::size_t n_mc = 0;
};

// Monte-Carlo estimate of ||f - g||_1 = E_{x~f} |1 - g(x)/f(x)|, sampling
// from f only. Deterministic in (f, g, n_mc, seed).
L1Estimate l1_mc(const Mixture& f, const Mixture& g, std::size_t n_mc = 200000,
                 std::uint64_t seed = 1);

// ||f - g||_1 for one-dimensional mixtures by adaptive Simpson quadrature
// over the union of the components' 12-sigma windows. Throws if the
// tolerance is not reached within the subdivision budget.
double l1_quadrature_1d(const Mixture& f, const Mixture& g,
                        double abs_tol = 1e-9);

// Integral of the density of a 1-D mixture over its 12-sigma windows;
// equals 1 up to quadrature and tail error. Used by validity checks.
double pdf_mass_1d(const Mixture& f, double abs_tol = 1e-9);

// Bhattacharyya coefficient of two scalar Gaussians:
//   B = y * exp(-x),  x = (mu1-mu2)^2 / (4 (var1+var2)),
//   y = sqrt(2 sigma1 sigma2 / (var1+var2)).
// Always in (0, 1].
double bhattacharyya_1d(double mu1, double var1, double mu2, double var2);

// L1 upper bound between two product Gaussians with per-coordinate means
// and variances: sqrt(8 * sum_i (1 - B_i)), clamped to [0, 2].
double l1_upper_bound_product(const std::vector<double>& mu1,
                              const std::vector<double>& var1,
                              const std::vector<double>& mu2,
                              const std::vector<double>& var2);

}  // namespace sphmix
