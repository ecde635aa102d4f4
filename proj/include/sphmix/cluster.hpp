#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sphmix/linalg.hpp"
#include "sphmix/model.hpp"

namespace sphmix {

// Gates and link thresholds for the clustering stages, all derived from
// (n, d, k, eps, delta) and the variance estimate. Natural logarithms
// throughout.
struct Thresholds {
  double sigma2_hat = 0.0;
  // Merge while squared distance <= 2 d s2 + 23 s2 sqrt(d ln(n^2/delta)).
  double coarse_merge_threshold = 0.0;
  // Split while ||scatter/|C| - s2 I||_2 >= 12 k^2 s2 ln(n^3/delta).
  double spectral_norm_gate = 0.0;
  // 1-D link threshold on eigenvector projections: 3 s sqrt(ln(n^2 k/delta)).
  double projected_link_threshold = 0.0;
  // Clusters with |C| >= n * min_cluster_fraction qualify (= eps / 5k).
  double min_cluster_fraction = 0.0;
};

Thresholds compute_thresholds(std::size_t n, std::size_t d, std::size_t k,
                              double eps, double delta, double sigma2_hat);

// Minimum over the first k+1 samples of ||x_a - x_b||^2 / (2d). Strictly
// positive unless two of those samples coincide.
double estimate_variance(const Dataset& data, std::size_t k);

struct Cluster {
  std::vector<std::size_t> members;  // ascending row indices
  ScatterStats stats;
};

// Partition of the rows. `assignments[i]` is the cluster id of row i, or
// -1 when the row was consumed for eigenvector estimation (and then lives
// in `discarded`). `unsplittable` lists clusters that met the spectral
// gate but were too small to give up the reserved rows a split needs.
struct Clustering {
  std::vector<int> assignments;
  std::vector<Cluster> clusters;
  std::vector<std::size_t> discarded;      // ascending
  std::vector<std::size_t> unsplittable;   // cluster ids, ascending
};

std::string clustering_to_json(const Clustering& c);

// Single linkage on squared Euclidean distance: merge while any
// inter-cluster minimum pairwise squared distance is <= the coarse merge
// threshold. Implemented as a minimum spanning tree (O(n) memory,
// O(n^2 d) time) cut at the threshold, which yields the same partition as
// threshold single linkage. Clusters are ordered by mean (lexicographic).
Clustering coarse_single_linkage(const Dataset& data, const Thresholds& th);

// Repeatedly splits clusters that are large (>= n * min_cluster_fraction)
// and spread out (spectral norm of the centered covariance >= gate):
// reserve ceil(n eps / 8k^2) members (seeded uniform draw; they move to
// `discarded`), take the top eigenvector of the reserved rows' centered
// covariance, project the remaining members onto it, and split at
// projected gaps > projected_link_threshold. Fresh sub-clusters re-enter
// the work queue; clusters too small to reserve from are marked
// unsplittable. Deterministic in (data, initial, th, k, eps, seed).
Clustering recursive_spectral_cluster(const Dataset& data,
                                      const Clustering& initial,
                                      const Thresholds& th, std::size_t k,
                                      double eps, std::uint64_t seed);

// Sort, then cut at consecutive gaps strictly greater than the link
// threshold. Returns groups of positions into `values`, each group and
// the group list ordered by ascending value.
std::vector<std::vector<std::size_t>> single_linkage_1d(
    const std::vector<double>& values, double link_threshold);

}  // namespace sphmix
