#include "sphmix/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "json.hpp"
#include "sphmix/rng.hpp"

namespace sphmix {
namespace {

double sq_dist(const Dataset& data, std::size_t a, std::size_t b) {
  const double* xa = data.row(a);
  const double* xb = data.row(b);
  double s = 0.0;
  for (std::size_t j = 0; j < data.d; ++j) {
    const double dj = xa[j] - xb[j];
    s += dj * dj;
  }
  return s;
}

// Row indices ordered by lexicographic row value (ties by index). Using
// value order for seeded draws and accumulation makes those steps depend
// on the sample multiset, not on the row numbering.
std::vector<std::size_t> value_sorted(const Dataset& data,
                                      std::vector<std::size_t> rows) {
  std::sort(rows.begin(), rows.end(), [&data](std::size_t a, std::size_t b) {
    const double* xa = data.row(a);
    const double* xb = data.row(b);
    for (std::size_t j = 0; j < data.d; ++j) {
      if (xa[j] != xb[j]) return xa[j] < xb[j];
    }
    return a < b;
  });
  return rows;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), std::size_t{0});
  }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

Clustering assemble(const Dataset& data,
                    std::vector<std::vector<std::size_t>> member_lists,
                    std::vector<bool> unsplittable_flags,
                    std::vector<std::size_t> discarded) {
  // Canonical cluster order: by mean (lexicographic), so downstream stages
  // see the same cluster sequence however the rows are numbered. Ties
  // (only possible for duplicated data) fall back to the smallest member.
  std::vector<Cluster> built(member_lists.size());
  for (std::size_t c = 0; c < member_lists.size(); ++c) {
    built[c].members = std::move(member_lists[c]);
    built[c].stats = accumulate(data, value_sorted(data, built[c].members));
  }
  std::vector<std::size_t> order(built.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&built](std::size_t a,
                                                 std::size_t b) {
    const std::vector<double>& ma = built[a].stats.mean;
    const std::vector<double>& mb = built[b].stats.mean;
    for (std::size_t j = 0; j < ma.size(); ++j) {
      if (ma[j] != mb[j]) return ma[j] < mb[j];
    }
    return built[a].members.front() < built[b].members.front();
  });
  Clustering out;
  out.assignments.assign(data.n, -1);
  for (std::size_t id = 0; id < order.size(); ++id) {
    Cluster c = std::move(built[order[id]]);
    for (const std::size_t i : c.members) {
      out.assignments[i] = static_cast<int>(id);
    }
    out.clusters.push_back(std::move(c));
    if (unsplittable_flags[order[id]]) out.unsplittable.push_back(id);
  }
  std::sort(discarded.begin(), discarded.end());
  out.discarded = std::move(discarded);
  return out;
}

}  // namespace

Thresholds compute_thresholds(std::size_t n, std::size_t d, std::size_t k,
                              double eps, double delta, double sigma2_hat) {
  if (n < 2 || d < 1 || k < 1) {
    throw std::invalid_argument("compute_thresholds: need n >= 2, d, k >= 1");
  }
  if (!(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument(
        "compute_thresholds: eps and delta must be in (0,1)");
  }
  if (!(sigma2_hat > 0.0)) {
    throw std::invalid_argument(
        "compute_thresholds: variance estimate must be positive "
        "(degenerate data?)");
  }
  const double dn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  const double dk = static_cast<double>(k);
  const double s2 = sigma2_hat;
  Thresholds t;
  t.sigma2_hat = s2;
  t.coarse_merge_threshold =
      2.0 * dd * s2 + 23.0 * s2 * std::sqrt(dd * std::log(dn * dn / delta));
  t.spectral_norm_gate = 12.0 * dk * dk * s2 * std::log(dn * dn * dn / delta);
  t.projected_link_threshold =
      3.0 * std::sqrt(s2) * std::sqrt(std::log(dn * dn * dk / delta));
  t.min_cluster_fraction = eps / (5.0 * dk);
  return t;
}

double estimate_variance(const Dataset& data, std::size_t k) {
  if (data.n <= k) {
    throw std::invalid_argument(
        "estimate_variance: needs at least k + 1 samples");
  }
  if (data.d < 1) throw std::invalid_argument("estimate_variance: d >= 1");
  const std::size_t m = k + 1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      best = std::min(best, sq_dist(data, a, b));
    }
  }
  return best / (2.0 * static_cast<double>(data.d));
}

Clustering coarse_single_linkage(const Dataset& data, const Thresholds& th) {
  const std::size_t n = data.n;
  Clustering out;
  if (n == 0) return out;

  // Minimum spanning tree by Prim's method: O(n) working memory. Cutting
  // MST edges above the merge threshold yields exactly the threshold
  // single-linkage components.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<double> best_d2(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> best_from(n, kNone);
  std::vector<char> in_tree(n, 0);
  struct Edge {
    std::size_t a, b;
    double d2;
  };
  std::vector<Edge> edges;
  edges.reserve(n > 0 ? n - 1 : 0);
  std::size_t cur = 0;
  in_tree[0] = 1;
  for (std::size_t added = 1; added < n; ++added) {
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const double d2 = sq_dist(data, cur, j);
      if (d2 < best_d2[j]) {
        best_d2[j] = d2;
        best_from[j] = cur;
      }
    }
    std::size_t pick = kNone;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (!in_tree[j] && best_d2[j] < bd) {
        bd = best_d2[j];
        pick = j;
      }
    }
    edges.push_back(Edge{best_from[pick], pick, bd});
    in_tree[pick] = 1;
    cur = pick;
  }

  UnionFind uf(n);
  for (const Edge& e : edges) {
    if (e.d2 <= th.coarse_merge_threshold) uf.unite(e.a, e.b);
  }
  std::vector<std::size_t> cluster_of_root(n, kNone);
  std::vector<std::vector<std::size_t>> member_lists;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = uf.find(i);
    if (cluster_of_root[root] == kNone) {
      cluster_of_root[root] = member_lists.size();
      member_lists.emplace_back();
    }
    member_lists[cluster_of_root[root]].push_back(i);
  }
  const std::size_t n_clusters = member_lists.size();
  return assemble(data, std::move(member_lists),
                  std::vector<bool>(n_clusters, false), {});
}

std::vector<std::vector<std::size_t>> single_linkage_1d(
    const std::vector<double>& values, double link_threshold) {
  if (values.empty()) {
    throw std::invalid_argument("single_linkage_1d: empty input");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&values](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  std::vector<std::vector<std::size_t>> parts;
  parts.emplace_back();
  parts.back().push_back(order[0]);
  for (std::size_t t = 1; t < order.size(); ++t) {
    if (values[order[t]] - values[order[t - 1]] > link_threshold) {
      parts.emplace_back();
    }
    parts.back().push_back(order[t]);
  }
  return parts;
}

Clustering recursive_spectral_cluster(const Dataset& data,
                                      const Clustering& initial,
                                      const Thresholds& th, std::size_t k,
                                      double eps, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("recursive_spectral_cluster: k >= 1");
  if (!(eps > 0.0)) {
    throw std::invalid_argument("recursive_spectral_cluster: eps > 0");
  }
  const double dn = static_cast<double>(data.n);
  const double min_size = dn * th.min_cluster_fraction;
  const auto reserve_target = static_cast<std::size_t>(
      std::ceil(dn * eps / (8.0 * static_cast<double>(k) *
                            static_cast<double>(k))));

  // Work queue seeded with the incoming clusters in mean-lex order so the
  // processing sequence depends on cluster values, not their labels.
  std::vector<std::size_t> order(initial.clusters.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&initial](std::size_t a,
                                                   std::size_t b) {
    const std::vector<double>& ma = initial.clusters[a].stats.mean;
    const std::vector<double>& mb = initial.clusters[b].stats.mean;
    for (std::size_t j = 0; j < ma.size(); ++j) {
      if (ma[j] != mb[j]) return ma[j] < mb[j];
    }
    return initial.clusters[a].members.front() <
           initial.clusters[b].members.front();
  });
  std::deque<std::vector<std::size_t>> queue;
  for (const std::size_t i : order) {
    queue.push_back(initial.clusters[i].members);
  }

  std::vector<std::vector<std::size_t>> final_members;
  std::vector<bool> final_unsplittable;
  std::vector<std::size_t> discarded = initial.discarded;
  std::uint64_t attempt = 0;
  // Every split consumes reserve_target rows, so the loop terminates on
  // its own; the cap is a hard backstop only.
  const std::uint64_t attempt_cap =
      static_cast<std::uint64_t>(data.n) + initial.clusters.size() + 1;

  const auto finalize = [&](std::vector<std::size_t> members, bool stuck) {
    final_members.push_back(std::move(members));
    final_unsplittable.push_back(stuck);
  };

  while (!queue.empty()) {
    std::vector<std::size_t> members = std::move(queue.front());
    queue.pop_front();
    if (attempt >= attempt_cap) {
      finalize(std::move(members), false);
      continue;
    }
    ++attempt;
    if (static_cast<double>(members.size()) < min_size ||
        members.size() < 2) {
      finalize(std::move(members), false);
      continue;
    }
    const ScatterStats stats = accumulate(data, value_sorted(data, members));
    const Matrix cov = centered_covariance(stats, th.sigma2_hat);
    const double norm =
        spectral_norm(cov, 0.0, kNoisySpectrumMaxIter,
                      derive_stream(seed, "specnorm", attempt));
    if (norm < th.spectral_norm_gate) {
      finalize(std::move(members), false);
      continue;
    }
    if (reserve_target < 2 || reserve_target >= members.size()) {
      // The gate fired but a split would consume the whole cluster (or
      // cannot form a covariance); record it as unsplittable.
      finalize(std::move(members), true);
      continue;
    }

    // Reserve a uniform subset (drawn from the value-ordered list) for
    // eigenvector estimation; those rows leave the clustering.
    std::vector<std::size_t> pool = value_sorted(data, members);
    RngStream rng(derive_stream(seed, "reserve", attempt));
    for (std::size_t a = 0; a < reserve_target; ++a) {
      const std::size_t b =
          a + static_cast<std::size_t>(rng.uniform_below(pool.size() - a));
      std::swap(pool[a], pool[b]);
    }
    std::vector<std::size_t> reserved(pool.begin(),
                                      pool.begin() + reserve_target);
    std::vector<std::size_t> remaining(pool.begin() + reserve_target,
                                       pool.end());
    std::sort(remaining.begin(), remaining.end());
    discarded.insert(discarded.end(), reserved.begin(), reserved.end());

    const ScatterStats rstats =
        accumulate(data, value_sorted(data, reserved));
    const Matrix rcov = centered_covariance(rstats, th.sigma2_hat);
    const EigPair top =
        top_eigs(rcov, 1, 0.0, kNoisySpectrumMaxIter,
                 derive_stream(seed, "eig", attempt))[0];

    std::vector<double> projections(remaining.size());
    for (std::size_t t = 0; t < remaining.size(); ++t) {
      const double* x = data.row(remaining[t]);
      double dot = 0.0;
      for (std::size_t j = 0; j < data.d; ++j) {
        dot += (x[j] - rstats.mean[j]) * top.vector[j];
      }
      projections[t] = dot;
    }
    const auto parts =
        single_linkage_1d(projections, th.projected_link_threshold);
    for (const auto& part : parts) {
      std::vector<std::size_t> sub;
      sub.reserve(part.size());
      for (const std::size_t pos : part) sub.push_back(remaining[pos]);
      std::sort(sub.begin(), sub.end());
      queue.push_back(std::move(sub));
    }
  }
  return assemble(data, std::move(final_members),
                  std::move(final_unsplittable), std::move(discarded));
}

std::string clustering_to_json(const Clustering& c) {
  nlohmann::json j;
  j["assignments"] = c.assignments;
  j["discarded"] = c.discarded;
  std::vector<std::size_t> sizes;
  sizes.reserve(c.clusters.size());
  for (const Cluster& cl : c.clusters) sizes.push_back(cl.members.size());
  j["cluster_sizes"] = sizes;
  j["unsplittable"] = c.unsplittable;
  return j.dump();
}

}  // namespace sphmix
