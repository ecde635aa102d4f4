#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sphmix {

// Sample matrix plus provenance. `labels` holds true component indices for
// synthetic data and is empty otherwise.
struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> samples;  // row-major, n * d
  std::uint64_t seed = 0;
  std::vector<int> labels;

  const double* row(std::size_t i) const { return samples.data() + i * d; }
  double* row(std::size_t i) { return samples.data() + i * d; }
};

// Mixture of k spherical Gaussians on R^d: component c has weight w_c, mean
// vector mu_c, and isotropic covariance sigma2_c * I.
//
// Invariants (checked on construction):
//   - k >= 1, d >= 1
//   - weights nonnegative, summing to 1 within 1e-12
//   - variances strictly positive
class Mixture {
 public:
  Mixture(std::vector<double> weights, std::vector<double> means,
          std::vector<double> variances, std::size_t d);

  std::size_t k() const { return k_; }
  std::size_t dim() const { return d_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& variances() const { return variances_; }
  const std::vector<double>& means() const { return means_; }
  const double* mean(std::size_t c) const { return means_.data() + c * d_; }
  double weight(std::size_t c) const { return weights_[c]; }
  double variance(std::size_t c) const { return variances_[c]; }

  // Log density at x (length d). Evaluated by log-sum-exp with max
  // subtraction; components are accumulated in a canonical order (sorted by
  // mean, then variance, then weight), so any permutation of equal
  // components yields a bit-identical value. Zero-weight components are
  // skipped.
  double log_pdf(const double* x) const;
  double log_pdf(const std::vector<double>& x) const;

  // Draws n samples; deterministic in (n, seed) and independent of any
  // global state. Labels record the source component of each row.
  Dataset sample(std::size_t n, std::uint64_t seed) const;

  // Components reordered canonically (the log_pdf evaluation order).
  Mixture canonical() const;

 private:
  std::size_t k_ = 0;
  std::size_t d_ = 0;
  std::vector<double> weights_;
  std::vector<double> means_;  // row-major, k * d
  std::vector<double> variances_;
  // Derived, fixed at construction.
  std::vector<std::size_t> eval_order_;
  std::vector<double> log_weights_;
  std::vector<double> inv_two_var_;
  std::vector<double> log_norm_;
};

// JSON round trip with schema
//   {"weights": [...], "means": [[...], ...], "variances": [...]}.
std::string mixture_to_json(const Mixture& m);
Mixture mixture_from_json(const std::string& text);

}  // namespace sphmix
