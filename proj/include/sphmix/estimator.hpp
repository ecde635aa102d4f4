#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sphmix/cluster.hpp"
#include "sphmix/linalg.hpp"
#include "sphmix/model.hpp"
#include "sphmix/scheffe.hpp"

namespace sphmix {

// Ceiling applied to candidate families when max_candidates is 0: the
// selection bracket materializes one index per candidate, so a family must
// stay addressable in memory. Exceeding it raises CandidateOverflowError.
inline constexpr std::size_t kDefaultCandidateCeiling = 100'000'000;

// Default family budget for the 1-D learner when max_candidates is 0. The
// all-pairs family grows as n'^(2k), so the seed-sample count n' is walked
// down until the worst-case family fits; this keeps an out-of-the-box run
// at interactive cost while an explicit max_candidates overrides it.
inline constexpr std::size_t kDefault1dCandidateBudget = 1'000'000;

struct EstimatorConfig {
  std::size_t k = 1;
  double eps = 0.1;
  double delta = 0.05;
  std::uint64_t seed = 1;
  // Coarsening multiplier (>= 1) on the span grid spacing. 1 reproduces
  // the reference grids exactly.
  double grid_scale = 1.0;
  // Candidate-count guardrail. Exceeding it raises CandidateOverflowError
  // carrying the exact count. 0 applies the built-in defaults:
  // kDefaultCandidateCeiling for grid families, and the 1-D learner
  // additionally shrinks its seed-sample count until the family fits
  // kDefault1dCandidateBudget.
  std::size_t max_candidates = 0;
  // Number of variance grid values; 0 = the full 2d grid. Smaller values
  // subsample the 2d grid uniformly (always keeping the largest).
  std::size_t sigma_grid_size = 0;
  // Coarsening multiplier (>= 1) on the weight grid spacing, separate
  // from grid_scale so coarsening means does not collapse the weight
  // resolution.
  double weight_grid_scale = 1.0;
  // Size the span grids from the observed member projections (plus
  // span_radius_slack scale units) instead of the theoretical radius,
  // which is far wider than any desk-scale data cloud.
  bool adaptive_span_radius = false;
  double span_radius_slack = 2.0;
  // Fresh draws per candidate per tournament game; 0 = number of rows
  // shown to the tournament.
  std::size_t scheffe_n_mc = 0;
  bool collect_audit = false;
};

// Affine frame a cluster contributes candidate means in: points are
// origin + scale * sum_j g_j basis[j] with grid coefficients g_j.
struct SpanBasis {
  std::size_t cluster_id = 0;
  std::vector<double> origin;               // length d
  std::vector<std::vector<double>> basis;   // up to k-1 orthonormal rows
  double scale = 0.0;                       // sigma hat
  // Optional per-direction radii in scale units (set by the adaptive
  // mode); empty means "use the theoretical radius".
  std::vector<double> radii;
};

class CandidateOverflowError : public std::runtime_error {
 public:
  CandidateOverflowError(const std::string& msg, unsigned long long count)
      : std::runtime_error(msg), count_(count) {}
  unsigned long long count() const { return count_; }

 private:
  unsigned long long count_;
};

// origin = cluster mean, basis = top min(k-1, d) eigenvectors of the
// cluster's centered covariance. k = 1 yields an empty basis.
// Eigensolver non-convergence propagates.
SpanBasis cluster_span(const ScatterStats& stats, std::size_t k,
                       double sigma2_hat, std::size_t cluster_id,
                       std::uint64_t eig_seed);

// Lazily indexed candidate family over (span points)^k x weight tuples x
// variance grid. Index layout, little-endian in the component digits:
//   index = ((sigma_id * W + weight_id) * P^k) + sum_t point_digit_t * P^t
// with P span points and W weight tuples.
class GridFamily final : public CandidateFamily {
 public:
  struct Decoded {
    std::vector<std::size_t> point_ids;  // length k
    std::size_t weight_id = 0;
    std::size_t sigma_id = 0;
  };

  GridFamily(std::size_t k, std::size_t d, std::vector<double> span_points,
             std::vector<double> weight_tuples,
             std::vector<double> sigma_values);

  std::size_t size() const override { return total_; }
  Mixture mixture(std::size_t index) const override;

  void decode(std::size_t index, Decoded& out) const;
  std::size_t k() const { return k_; }
  std::size_t dim() const { return d_; }
  std::size_t n_span_points() const { return span_points_.size() / d_; }
  const double* span_point(std::size_t p) const {
    return span_points_.data() + p * d_;
  }
  std::size_t n_weight_tuples() const { return weight_tuples_.size() / k_; }
  const double* weight_tuple(std::size_t w) const {
    return weight_tuples_.data() + w * k_;
  }
  std::size_t n_sigma_values() const { return sigma_values_.size(); }
  double sigma_value(std::size_t s) const { return sigma_values_[s]; }

 private:
  std::size_t k_;
  std::size_t d_;
  std::vector<double> span_points_;    // P * d
  std::vector<double> weight_tuples_;  // W * k
  std::vector<double> sigma_values_;   // S
  std::size_t total_;
};

// Enumerates the candidate family for the given spans: per-cluster grids
// of coefficient multiples over each basis direction, the union of the
// resulting mean points across clusters, weight tuples on the eps/4k grid
// (last weight = 1 - sum, negative remainders excluded), and the variance
// grid sigma2_hat * (1 + i/d), i in (-d, d]. Counts before materializing;
// exceeding cfg.max_candidates raises CandidateOverflowError with the
// exact count.
GridFamily build_candidates(const std::vector<SpanBasis>& spans,
                            double sigma2_hat, const EstimatorConfig& cfg,
                            std::size_t n);

// One-dimensional candidate family: component pool
// S = {(x_j, (x_j - x_l)^2) : j != l, x_j != x_l} deduplicated by value,
// combined with weight tuples on the eps/2k grid.
class PairFamily final : public CandidateFamily {
 public:
  PairFamily(std::size_t k, std::vector<double> comp_means,
             std::vector<double> comp_vars, std::vector<double> weight_tuples);

  std::size_t size() const override { return total_; }
  Mixture mixture(std::size_t index) const override;

  std::size_t k() const { return k_; }
  std::size_t n_components() const { return comp_means_.size(); }
  double comp_mean(std::size_t t) const { return comp_means_[t]; }
  double comp_var(std::size_t t) const { return comp_vars_[t]; }
  std::size_t n_weight_tuples() const { return weight_tuples_.size() / k_; }
  const double* weight_tuple(std::size_t w) const {
    return weight_tuples_.data() + w * k_;
  }

 private:
  std::size_t k_;
  std::vector<double> comp_means_;
  std::vector<double> comp_vars_;
  std::vector<double> weight_tuples_;
  std::size_t total_;
};

PairFamily build_candidates_1d(const std::vector<double>& samples,
                               std::size_t k, double eps, double delta,
                               double weight_grid_scale = 1.0,
                               std::size_t max_candidates = 0);

struct LearnReport {
  double sigma2_hat = 0.0;
  Thresholds thresholds;  // zeroed on the 1-D path
  std::vector<std::size_t> cluster_sizes;
  std::size_t n_discarded = 0;
  std::size_t n_unsplittable = 0;
  std::size_t span_dim = 0;  // combined reduced dimension (d-dim path)
  std::size_t n_span_points = 0;
  std::size_t n_weight_tuples = 0;
  std::size_t n_sigma_values = 0;
  std::size_t n_candidates = 0;
  std::size_t n_prime = 0;  // samples consumed by 1-D candidate building
  std::size_t n_tournament_rows = 0;
  std::size_t n_mc = 0;
  std::size_t winner_index = 0;
  std::size_t n_games = 0;
  bool reduced_tournament = false;
  std::vector<GameRecord> audit;
};

std::string learn_report_to_json(const LearnReport& report);

struct LearnResult {
  Mixture mixture;
  LearnReport report;
};

// Full pipeline: variance estimate, coarse single linkage, recursive
// spectral refinement, span grids, candidate enumeration, tournament
// selection. Deterministic in (data, cfg).
LearnResult learn_k_sphere(const Dataset& data, const EstimatorConfig& cfg);

// One-dimensional pipeline: candidates from the first n' samples
// (n' = ceil(120 k ln(4k/delta) / eps), clamped to half the data and to
// the candidate budget), tournament on the remainder.
LearnResult learn_1d(const std::vector<double>& samples,
                     const EstimatorConfig& cfg);

}  // namespace sphmix
