#include "sphmix/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "json.hpp"
#include "sphmix/detail/kernel.hpp"
#include "sphmix/detail/tournament.hpp"
#include "sphmix/rng.hpp"

namespace sphmix {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

void validate_config(const EstimatorConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("config: k >= 1");
  if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) {
    throw std::invalid_argument("config: eps must be in (0,1)");
  }
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) {
    throw std::invalid_argument("config: delta must be in (0,1)");
  }
  if (!(cfg.grid_scale >= 1.0)) {
    throw std::invalid_argument("config: grid_scale >= 1");
  }
  if (!(cfg.weight_grid_scale >= 1.0)) {
    throw std::invalid_argument("config: weight_grid_scale >= 1");
  }
  if (!(cfg.span_radius_slack >= 0.0)) {
    throw std::invalid_argument("config: span_radius_slack >= 0");
  }
}

using U128 = unsigned __int128;
constexpr U128 kCountCeiling = static_cast<U128>(1) << 100;

U128 sat_mul(U128 a, U128 b) {
  if (a == 0 || b == 0) return 0;
  if (a > kCountCeiling / b) return kCountCeiling;
  return a * b;
}

unsigned long long clamp_count(U128 v) {
  const U128 lim = std::numeric_limits<unsigned long long>::max();
  return v > lim ? std::numeric_limits<unsigned long long>::max()
                 : static_cast<unsigned long long>(v);
}

std::string count_text(U128 v) {
  if (v >= kCountCeiling) return "more than 2^100";
  if (v > std::numeric_limits<unsigned long long>::max()) {
    return "more than 2^64";
  }
  return std::to_string(static_cast<unsigned long long>(v));
}

// {0, s, 2s, ...} strictly below 1, then 1 itself.
std::vector<double> weight_values(double spacing) {
  if (!(spacing > 0.0)) {
    throw std::invalid_argument("weight grid: spacing must be positive");
  }
  std::vector<double> vals;
  for (std::size_t j = 0;; ++j) {
    const double v = spacing * static_cast<double>(j);
    if (v >= 1.0 - 1e-12) break;
    vals.push_back(v);
    if (vals.size() > 1000000) {
      throw std::invalid_argument("weight grid: spacing too small");
    }
  }
  vals.push_back(1.0);
  return vals;
}

// All k-length tuples whose first k-1 entries come from the weight grid
// and whose implied last entry 1 - sum is nonnegative. Flattened, k per
// tuple.
std::vector<double> make_weight_tuples(std::size_t k, double spacing) {
  std::vector<double> tuples;
  if (k == 1) {
    tuples.push_back(1.0);
    return tuples;
  }
  const std::vector<double> vals = weight_values(spacing);
  std::vector<std::size_t> digit(k - 1, 0);
  while (true) {
    double sum = 0.0;
    for (std::size_t t = 0; t < k - 1; ++t) sum += vals[digit[t]];
    if (sum <= 1.0 + 1e-9) {
      for (std::size_t t = 0; t < k - 1; ++t) tuples.push_back(vals[digit[t]]);
      tuples.push_back(std::max(0.0, 1.0 - sum));
    }
    std::size_t t = 0;
    while (t < k - 1 && ++digit[t] == vals.size()) {
      digit[t] = 0;
      ++t;
    }
    if (t == k - 1) break;
  }
  return tuples;
}

// sigma2_hat * (1 + i/d) for i in (-d, d], optionally subsampled to
// `requested` values spread uniformly across the grid (largest kept).
std::vector<double> make_sigma_grid(double sigma2_hat, std::size_t d,
                                    std::size_t requested) {
  std::vector<double> full;
  full.reserve(2 * d);
  const double dd = static_cast<double>(d);
  for (long i = -static_cast<long>(d) + 1; i <= static_cast<long>(d); ++i) {
    full.push_back(sigma2_hat * (1.0 + static_cast<double>(i) / dd));
  }
  if (requested == 0 || requested >= full.size()) return full;
  std::vector<double> out;
  out.reserve(requested);
  for (std::size_t t = 0; t < requested; ++t) {
    const std::size_t pos = ((t + 1) * full.size()) / requested - 1;
    out.push_back(full[pos]);
  }
  return out;
}

// Coefficient multiples of `spacing` within [-radius, radius]; always
// contains 0.
std::vector<double> coeff_grid(double radius, double spacing) {
  const auto imax =
      static_cast<long>(std::floor(radius / spacing + 1e-12));
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(2 * std::max(0L, imax) + 1));
  for (long i = -imax; i <= imax; ++i) {
    g.push_back(spacing * static_cast<double>(i));
  }
  return g;
}

std::size_t checked_pow(std::size_t base, std::size_t e) {
  U128 v = 1;
  for (std::size_t t = 0; t < e; ++t) v = sat_mul(v, base);
  if (v > std::numeric_limits<std::size_t>::max()) {
    throw std::overflow_error("candidate family too large to index");
  }
  return static_cast<std::size_t>(v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Candidate families

GridFamily::GridFamily(std::size_t k, std::size_t d,
                       std::vector<double> span_points,
                       std::vector<double> weight_tuples,
                       std::vector<double> sigma_values)
    : k_(k),
      d_(d),
      span_points_(std::move(span_points)),
      weight_tuples_(std::move(weight_tuples)),
      sigma_values_(std::move(sigma_values)) {
  if (k_ < 1 || d_ < 1) throw std::invalid_argument("GridFamily: k, d >= 1");
  if (span_points_.empty() || span_points_.size() % d_ != 0) {
    throw std::invalid_argument("GridFamily: bad span point block");
  }
  if (weight_tuples_.empty() || weight_tuples_.size() % k_ != 0) {
    throw std::invalid_argument("GridFamily: bad weight tuple block");
  }
  if (sigma_values_.empty()) {
    throw std::invalid_argument("GridFamily: empty variance grid");
  }
  for (const double s : sigma_values_) {
    if (!(s > 0.0)) throw std::invalid_argument("GridFamily: variance <= 0");
  }
  const std::size_t pk = checked_pow(n_span_points(), k_);
  U128 total = sat_mul(sat_mul(pk, n_weight_tuples()), n_sigma_values());
  if (total > std::numeric_limits<std::size_t>::max()) {
    throw std::overflow_error("candidate family too large to index");
  }
  total_ = static_cast<std::size_t>(total);
}

void GridFamily::decode(std::size_t index, Decoded& out) const {
  if (index >= total_) throw std::out_of_range("GridFamily: index");
  const std::size_t p = n_span_points();
  out.point_ids.resize(k_);
  std::size_t rem = index;
  for (std::size_t t = 0; t < k_; ++t) {
    out.point_ids[t] = rem % p;
    rem /= p;
  }
  out.weight_id = rem % n_weight_tuples();
  out.sigma_id = rem / n_weight_tuples();
}

Mixture GridFamily::mixture(std::size_t index) const {
  Decoded dec;
  decode(index, dec);
  std::vector<double> weights(weight_tuple(dec.weight_id),
                              weight_tuple(dec.weight_id) + k_);
  std::vector<double> means(k_ * d_);
  for (std::size_t t = 0; t < k_; ++t) {
    const double* p = span_point(dec.point_ids[t]);
    std::copy(p, p + d_, means.begin() + t * d_);
  }
  std::vector<double> vars(k_, sigma_value(dec.sigma_id));
  return Mixture(std::move(weights), std::move(means), std::move(vars), d_);
}

PairFamily::PairFamily(std::size_t k, std::vector<double> comp_means,
                       std::vector<double> comp_vars,
                       std::vector<double> weight_tuples)
    : k_(k),
      comp_means_(std::move(comp_means)),
      comp_vars_(std::move(comp_vars)),
      weight_tuples_(std::move(weight_tuples)) {
  if (k_ < 1) throw std::invalid_argument("PairFamily: k >= 1");
  if (comp_means_.empty() || comp_means_.size() != comp_vars_.size()) {
    throw std::invalid_argument("PairFamily: bad component pool");
  }
  if (weight_tuples_.empty() || weight_tuples_.size() % k_ != 0) {
    throw std::invalid_argument("PairFamily: bad weight tuple block");
  }
  const std::size_t sk = checked_pow(comp_means_.size(), k_);
  U128 total = sat_mul(sk, n_weight_tuples());
  if (total > std::numeric_limits<std::size_t>::max()) {
    throw std::overflow_error("candidate family too large to index");
  }
  total_ = static_cast<std::size_t>(total);
}

Mixture PairFamily::mixture(std::size_t index) const {
  if (index >= total_) throw std::out_of_range("PairFamily: index");
  const std::size_t s = comp_means_.size();
  std::vector<double> means(k_);
  std::vector<double> vars(k_);
  std::size_t rem = index;
  for (std::size_t t = 0; t < k_; ++t) {
    const std::size_t id = rem % s;
    rem /= s;
    means[t] = comp_means_[id];
    vars[t] = comp_vars_[id];
  }
  const double* w = weight_tuple(rem);
  return Mixture(std::vector<double>(w, w + k_), std::move(means),
                 std::move(vars), 1);
}

// ---------------------------------------------------------------------------
// Candidate construction

SpanBasis cluster_span(const ScatterStats& stats, std::size_t k,
                       double sigma2_hat, std::size_t cluster_id,
                       std::uint64_t eig_seed) {
  if (stats.count < 2) {
    throw std::invalid_argument("cluster_span: needs at least 2 rows");
  }
  if (k < 1) throw std::invalid_argument("cluster_span: k >= 1");
  SpanBasis sb;
  sb.cluster_id = cluster_id;
  sb.origin = stats.mean;
  sb.scale = std::sqrt(sigma2_hat);
  const std::size_t d = stats.mean.size();
  const std::size_t r = std::min(k - 1, d);
  if (r > 0) {
    const Matrix cov = centered_covariance(stats, sigma2_hat);
    const std::vector<EigPair> eigs =
        top_eigs(cov, r, 0.0, kNoisySpectrumMaxIter, eig_seed);
    for (const EigPair& e : eigs) sb.basis.push_back(e.vector);
  }
  return sb;
}

GridFamily build_candidates(const std::vector<SpanBasis>& spans,
                            double sigma2_hat, const EstimatorConfig& cfg,
                            std::size_t n) {
  validate_config(cfg);
  if (spans.empty()) {
    throw std::invalid_argument(
        "build_candidates: no qualifying clusters to span");
  }
  if (!(sigma2_hat > 0.0)) {
    throw std::invalid_argument("build_candidates: sigma2_hat > 0");
  }
  const std::size_t d = spans.front().origin.size();
  for (const SpanBasis& s : spans) {
    if (s.origin.size() != d) {
      throw std::invalid_argument("build_candidates: mixed dimensions");
    }
    if (s.basis.size() + 1 > cfg.k) {
      throw std::invalid_argument("build_candidates: basis larger than k-1");
    }
  }

  const double dk = static_cast<double>(cfg.k);
  const double eps_g =
      cfg.eps / (16.0 * dk * std::sqrt(dk)) * cfg.grid_scale;
  const double radius_default =
      200.0 * std::sqrt(dk * dk * dk * dk / cfg.eps *
                        std::log(static_cast<double>(n) *
                                 static_cast<double>(n) / cfg.delta));

  // Count the span points before materializing anything.
  U128 point_count = 0;
  for (const SpanBasis& s : spans) {
    U128 c = 1;
    for (std::size_t j = 0; j < s.basis.size(); ++j) {
      const double radius =
          s.radii.empty() ? radius_default : s.radii[j];
      const auto imax =
          static_cast<long>(std::floor(radius / eps_g + 1e-12));
      c = sat_mul(c, static_cast<U128>(2 * std::max(0L, imax) + 1));
    }
    point_count += c;
    if (point_count > kCountCeiling) point_count = kCountCeiling;
  }

  const std::vector<double> tuples = make_weight_tuples(
      cfg.k, cfg.eps / (4.0 * dk) * cfg.weight_grid_scale);
  const std::size_t n_w = tuples.size() / cfg.k;
  const std::vector<double> sigmas =
      make_sigma_grid(sigma2_hat, d, cfg.sigma_grid_size);

  U128 total = 1;
  for (std::size_t t = 0; t < cfg.k; ++t) total = sat_mul(total, point_count);
  total = sat_mul(sat_mul(total, n_w), sigmas.size());
  const std::size_t cap =
      cfg.max_candidates > 0 ? cfg.max_candidates : kDefaultCandidateCeiling;
  if (total > cap) {
    throw CandidateOverflowError(
        "build_candidates: family of " + count_text(total) +
            " candidates exceeds " +
            (cfg.max_candidates > 0 ? "max_candidates = "
                                    : "the built-in ceiling of ") +
            std::to_string(cap) +
            "; raise grid_scale / weight_grid_scale or lower "
            "sigma_grid_size",
        clamp_count(total));
  }
  if (total > std::numeric_limits<std::size_t>::max() ||
      sat_mul(point_count, d) > (U128{1} << 31)) {
    throw CandidateOverflowError(
        "build_candidates: family of " + count_text(total) +
            " candidates cannot be indexed on this machine; set "
            "max_candidates and coarsen the grids",
        clamp_count(total));
  }

  std::vector<double> points;
  points.reserve(static_cast<std::size_t>(point_count) * d);
  std::vector<double> point(d);
  for (const SpanBasis& s : spans) {
    std::vector<std::vector<double>> grids;
    for (std::size_t j = 0; j < s.basis.size(); ++j) {
      const double radius = s.radii.empty() ? radius_default : s.radii[j];
      grids.push_back(coeff_grid(radius, eps_g));
    }
    if (grids.empty()) {
      points.insert(points.end(), s.origin.begin(), s.origin.end());
      continue;
    }
    std::vector<std::size_t> digit(grids.size(), 0);
    while (true) {
      std::copy(s.origin.begin(), s.origin.end(), point.begin());
      for (std::size_t j = 0; j < grids.size(); ++j) {
        const double g = grids[j][digit[j]] * s.scale;
        const std::vector<double>& u = s.basis[j];
        for (std::size_t a = 0; a < d; ++a) point[a] += g * u[a];
      }
      points.insert(points.end(), point.begin(), point.end());
      std::size_t j = 0;
      while (j < grids.size() && ++digit[j] == grids[j].size()) {
        digit[j] = 0;
        ++j;
      }
      if (j == grids.size()) break;
    }
  }
  return GridFamily(cfg.k, d, std::move(points), tuples, sigmas);
}

PairFamily build_candidates_1d(const std::vector<double>& samples,
                               std::size_t k, double eps, double delta,
                               double weight_grid_scale,
                               std::size_t max_candidates) {
  if (samples.size() < 2) {
    throw std::invalid_argument("build_candidates_1d: needs >= 2 samples");
  }
  if (k < 1) throw std::invalid_argument("build_candidates_1d: k >= 1");
  if (!(eps > 0.0 && eps < 1.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument(
        "build_candidates_1d: eps, delta must be in (0,1)");
  }
  (void)delta;  // part of the construction contract; grids depend on eps

  std::vector<std::pair<double, double>> pool;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    for (std::size_t l = 0; l < samples.size(); ++l) {
      if (j == l || samples[j] == samples[l]) continue;
      const double diff = samples[j] - samples[l];
      pool.emplace_back(samples[j], diff * diff);
    }
  }
  if (pool.empty()) {
    throw std::invalid_argument(
        "build_candidates_1d: all samples identical, no positive variance "
        "available");
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  const std::vector<double> tuples = make_weight_tuples(
      k, eps / (2.0 * static_cast<double>(k)) * weight_grid_scale);
  const std::size_t n_w = tuples.size() / k;
  U128 total = 1;
  for (std::size_t t = 0; t < k; ++t) total = sat_mul(total, pool.size());
  total = sat_mul(total, n_w);
  const std::size_t cap =
      max_candidates > 0 ? max_candidates : kDefaultCandidateCeiling;
  if (total > cap) {
    throw CandidateOverflowError(
        "build_candidates_1d: family of " + count_text(total) +
            " candidates exceeds " +
            (max_candidates > 0 ? "max_candidates = "
                                : "the built-in ceiling of ") +
            std::to_string(cap) + "; use fewer seed samples",
        clamp_count(total));
  }

  std::vector<double> means;
  std::vector<double> vars;
  means.reserve(pool.size());
  vars.reserve(pool.size());
  for (const auto& [m, v] : pool) {
    means.push_back(m);
    vars.push_back(v);
  }
  return PairFamily(k, std::move(means), std::move(vars), tuples);
}

// ---------------------------------------------------------------------------
// Reduced-space tournament

namespace {

struct ReducedSpace {
  bool ok = false;
  std::size_t d = 0;
  std::size_t m = 0;
  std::vector<double> origin;  // d
  std::vector<double> q;       // m * d, orthonormal rows
};

// Orthonormal frame spanning every cluster's candidate-mean plane:
// offsets between cluster origins plus all basis directions.
ReducedSpace build_reduced_space(const std::vector<SpanBasis>& spans,
                                 std::size_t d) {
  ReducedSpace rs;
  rs.d = d;
  rs.origin = spans.front().origin;
  std::vector<std::vector<double>> dirs;
  for (const SpanBasis& s : spans) {
    std::vector<double> off(d);
    for (std::size_t a = 0; a < d; ++a) off[a] = s.origin[a] - rs.origin[a];
    dirs.push_back(std::move(off));
    for (const std::vector<double>& u : s.basis) dirs.push_back(u);
  }
  for (const std::vector<double>& v : dirs) {
    std::vector<double> w = v;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t r = 0; r < rs.m; ++r) {
        const double* qr = rs.q.data() + r * d;
        double dot = 0.0;
        for (std::size_t a = 0; a < d; ++a) dot += w[a] * qr[a];
        for (std::size_t a = 0; a < d; ++a) w[a] -= dot * qr[a];
      }
    }
    double nrm2 = 0.0;
    double ref2 = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      nrm2 += w[a] * w[a];
      ref2 += v[a] * v[a];
    }
    const double nrm = std::sqrt(nrm2);
    if (nrm > 1e-8 * std::max(1.0, std::sqrt(ref2))) {
      for (std::size_t a = 0; a < d; ++a) rs.q.push_back(w[a] / nrm);
      ++rs.m;
    }
  }
  rs.ok = rs.m <= static_cast<std::size_t>(detail::kMaxKernelM);
  return rs;
}

// Feature reduction of a raw data row set against the frame. Requires
// m >= 1 (callers gate on it).
detail::FeatureRows reduce_rows(const Dataset& data, const ReducedSpace& rs) {
  detail::FeatureRows rows =
      detail::FeatureRows::with_capacity(static_cast<int>(rs.m), data.n);
  std::vector<double> coords(rs.m, 0.0);
  for (std::size_t i = 0; i < data.n; ++i) {
    const double* x = data.row(i);
    double full2 = 0.0;
    for (std::size_t a = 0; a < rs.d; ++a) {
      const double c = x[a] - rs.origin[a];
      full2 += c * c;
    }
    double in2 = 0.0;
    for (std::size_t r = 0; r < rs.m; ++r) {
      const double* qr = rs.q.data() + r * rs.d;
      double dot = 0.0;
      for (std::size_t a = 0; a < rs.d; ++a) {
        dot += (x[a] - rs.origin[a]) * qr[a];
      }
      coords[r] = dot;
      in2 += dot * dot;
    }
    rows.push_row(coords.data(), std::max(0.0, full2 - in2));
  }
  return rows;
}

// Span points expressed in frame coordinates; returns false if any point
// leaves a residual, meaning the frame does not actually span it.
bool reduce_points(const GridFamily& family, const ReducedSpace& rs,
                   std::vector<double>& coords_out) {
  const std::size_t p = family.n_span_points();
  coords_out.assign(p * rs.m, 0.0);
  for (std::size_t t = 0; t < p; ++t) {
    const double* x = family.span_point(t);
    double full2 = 0.0;
    for (std::size_t a = 0; a < rs.d; ++a) {
      const double c = x[a] - rs.origin[a];
      full2 += c * c;
    }
    double in2 = 0.0;
    for (std::size_t r = 0; r < rs.m; ++r) {
      const double* qr = rs.q.data() + r * rs.d;
      double dot = 0.0;
      for (std::size_t a = 0; a < rs.d; ++a) {
        dot += (x[a] - rs.origin[a]) * qr[a];
      }
      coords_out[t * rs.m + r] = dot;
      in2 += dot * dot;
    }
    if (full2 - in2 > 1e-12 * std::max(1.0, full2) + 1e-12) return false;
  }
  return true;
}

// Plays tournament games directly on frame coordinates: candidate means
// are span points (in-frame by construction), so a row's m coordinates
// plus its orthogonal residual determine every candidate's density.
class SpanGamePlayer {
 public:
  SpanGamePlayer(const GridFamily& family, const ReducedSpace& rs,
                 const detail::FeatureRows& data_rows,
                 const std::vector<double>& point_coords, std::size_t n_mc)
      : family_(family),
        rs_(rs),
        data_rows_(data_rows),
        point_coords_(point_coords),
        n_mc_(n_mc) {
    sigma_log_norm_.reserve(family.n_sigma_values());
    const double dd = static_cast<double>(rs.d);
    for (std::size_t s = 0; s < family.n_sigma_values(); ++s) {
      sigma_log_norm_.push_back(
          -0.5 * dd * (kLogTwoPi + std::log(family.sigma_value(s))));
    }
    const std::size_t k = family.k();
    log_weights_.resize(family.n_weight_tuples() * k);
    for (std::size_t w = 0; w < family.n_weight_tuples(); ++w) {
      const double* tup = family.weight_tuple(w);
      for (std::size_t t = 0; t < k; ++t) {
        log_weights_[w * k + t] = std::log(tup[t]);
      }
    }
  }

  GameRecord operator()(std::size_t i, std::size_t j, std::uint64_t seed) {
    family_.decode(i, dec_p_);
    family_.decode(j, dec_q_);
    const detail::KernelCandidate kp = make_candidate(dec_p_);
    const detail::KernelCandidate kq = make_candidate(dec_q_);
    GameRecord rec;
    rec.index_p = i;
    rec.index_q = j;
    rec.mu_f =
        static_cast<double>(detail::count_first_gt(data_rows_, kp, kq)) /
        static_cast<double>(data_rows_.n);
    sample_rows(dec_p_, derive_stream(seed, "p-draws"));
    rec.mu_p = static_cast<double>(detail::count_first_gt(scratch_, kp, kq)) /
               static_cast<double>(n_mc_);
    sample_rows(dec_q_, derive_stream(seed, "q-draws"));
    rec.mu_q = static_cast<double>(detail::count_first_gt(scratch_, kp, kq)) /
               static_cast<double>(n_mc_);
    const double dp = std::abs(rec.mu_p - rec.mu_f);
    const double dq = std::abs(rec.mu_q - rec.mu_f);
    rec.winner = dp < dq ? i : (dq < dp ? j : std::min(i, j));
    return rec;
  }

 private:
  detail::KernelCandidate make_candidate(const GridFamily::Decoded& dec) const {
    detail::KernelCandidate cand;
    cand.k = static_cast<int>(family_.k());
    const double s2 = family_.sigma_value(dec.sigma_id);
    const double iv = 1.0 / (2.0 * s2);
    for (std::size_t t = 0; t < family_.k(); ++t) {
      detail::KernelComponent& kc = cand.comp[t];
      kc.base = log_weights_[dec.weight_id * family_.k() + t] +
                sigma_log_norm_[dec.sigma_id];
      kc.iv = iv;
      const double* g = point_coords_.data() + dec.point_ids[t] * rs_.m;
      for (std::size_t r = 0; r < rs_.m; ++r) kc.g[r] = g[r];
    }
    return cand;
  }

  // Fresh draws from the candidate, in frame coordinates: the in-frame
  // part is mean + sigma' * normal, the orthogonal residual is
  // sigma'^2 * chi^2 with d - m degrees of freedom.
  void sample_rows(const GridFamily::Decoded& dec, std::uint64_t seed) {
    scratch_.reset(static_cast<int>(rs_.m), n_mc_);
    RngStream rng(seed);
    const std::size_t k = family_.k();
    const double* w = family_.weight_tuple(dec.weight_id);
    const double s2 = family_.sigma_value(dec.sigma_id);
    const double sd = std::sqrt(s2);
    const double resid_df = static_cast<double>(rs_.d - rs_.m);
    std::vector<double>& coords = coord_scratch_;
    coords.assign(rs_.m, 0.0);
    for (std::size_t s = 0; s < n_mc_; ++s) {
      const double u = rng.uniform();
      std::size_t c = k - 1;
      double cum = 0.0;
      for (std::size_t t = 0; t + 1 < k; ++t) {
        cum += w[t];
        if (u < cum) {
          c = t;
          break;
        }
      }
      const double* g = point_coords_.data() + dec.point_ids[c] * rs_.m;
      for (std::size_t r = 0; r < rs_.m; ++r) {
        coords[r] = g[r] + sd * rng.normal();
      }
      const double r2 =
          resid_df > 0.0 ? s2 * rng.chi_square(resid_df) : 0.0;
      scratch_.push_row(coords.data(), r2);
    }
  }

  const GridFamily& family_;
  const ReducedSpace& rs_;
  const detail::FeatureRows& data_rows_;
  const std::vector<double>& point_coords_;
  std::size_t n_mc_;
  std::vector<double> sigma_log_norm_;
  std::vector<double> log_weights_;
  GridFamily::Decoded dec_p_;
  GridFamily::Decoded dec_q_;
  detail::FeatureRows scratch_;
  std::vector<double> coord_scratch_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Pipelines

std::string learn_report_to_json(const LearnReport& r) {
  nlohmann::json j;
  j["sigma2_hat"] = r.sigma2_hat;
  j["thresholds"] = {
      {"sigma2_hat", r.thresholds.sigma2_hat},
      {"coarse_merge_threshold", r.thresholds.coarse_merge_threshold},
      {"spectral_norm_gate", r.thresholds.spectral_norm_gate},
      {"projected_link_threshold", r.thresholds.projected_link_threshold},
      {"min_cluster_fraction", r.thresholds.min_cluster_fraction}};
  j["cluster_sizes"] = r.cluster_sizes;
  j["n_discarded"] = r.n_discarded;
  j["n_unsplittable"] = r.n_unsplittable;
  j["span_dim"] = r.span_dim;
  j["n_span_points"] = r.n_span_points;
  j["n_weight_tuples"] = r.n_weight_tuples;
  j["n_sigma_values"] = r.n_sigma_values;
  j["n_candidates"] = r.n_candidates;
  j["n_prime"] = r.n_prime;
  j["n_tournament_rows"] = r.n_tournament_rows;
  j["n_mc"] = r.n_mc;
  j["winner_index"] = r.winner_index;
  j["n_games"] = r.n_games;
  j["reduced_tournament"] = r.reduced_tournament;
  return j.dump();
}

LearnResult learn_k_sphere(const Dataset& data, const EstimatorConfig& cfg) {
  validate_config(cfg);
  if (data.n < cfg.k + 1) {
    throw std::invalid_argument("learn_k_sphere: needs at least k+1 samples");
  }
  if (data.d < 2) {
    throw std::invalid_argument(
        "learn_k_sphere: needs d >= 2 (use the 1-D path otherwise)");
  }

  LearnReport report;
  const double sigma2_hat = estimate_variance(data, cfg.k);
  report.sigma2_hat = sigma2_hat;
  const Thresholds th = compute_thresholds(data.n, data.d, cfg.k, cfg.eps,
                                           cfg.delta, sigma2_hat);
  report.thresholds = th;

  const Clustering coarse = coarse_single_linkage(data, th);
  const Clustering clustering = recursive_spectral_cluster(
      data, coarse, th, cfg.k, cfg.eps, derive_stream(cfg.seed, "recluster"));
  for (const Cluster& c : clustering.clusters) {
    report.cluster_sizes.push_back(c.members.size());
  }
  report.n_discarded = clustering.discarded.size();
  report.n_unsplittable = clustering.unsplittable.size();

  const double min_size =
      static_cast<double>(data.n) * th.min_cluster_fraction;
  std::vector<SpanBasis> spans;
  const double sigma_hat = std::sqrt(sigma2_hat);
  for (std::size_t c = 0; c < clustering.clusters.size(); ++c) {
    const Cluster& cl = clustering.clusters[c];
    if (static_cast<double>(cl.members.size()) < min_size) continue;
    if (cl.stats.count < 2) continue;
    SpanBasis sb = cluster_span(cl.stats, cfg.k, sigma2_hat, c,
                                derive_stream(cfg.seed, "span", c));
    if (cfg.adaptive_span_radius && !sb.basis.empty()) {
      sb.radii.assign(sb.basis.size(), 0.0);
      for (const std::size_t i : cl.members) {
        const double* x = data.row(i);
        for (std::size_t j = 0; j < sb.basis.size(); ++j) {
          double dot = 0.0;
          for (std::size_t a = 0; a < data.d; ++a) {
            dot += (x[a] - sb.origin[a]) * sb.basis[j][a];
          }
          sb.radii[j] = std::max(sb.radii[j], std::abs(dot) / sigma_hat);
        }
      }
      for (double& r : sb.radii) r += cfg.span_radius_slack;
    }
    spans.push_back(std::move(sb));
  }

  const GridFamily family = build_candidates(spans, sigma2_hat, cfg, data.n);
  report.n_span_points = family.n_span_points();
  report.n_weight_tuples = family.n_weight_tuples();
  report.n_sigma_values = family.n_sigma_values();
  report.n_candidates = family.size();

  const std::size_t n_mc = cfg.scheffe_n_mc > 0 ? cfg.scheffe_n_mc : data.n;
  report.n_mc = n_mc;
  report.n_tournament_rows = data.n;
  const std::uint64_t tournament_seed = derive_stream(cfg.seed, "tournament");

  ReducedSpace rs = build_reduced_space(spans, data.d);
  report.span_dim = rs.m;
  std::vector<double> point_coords;
  const bool reduced_ok =
      rs.ok && cfg.k <= static_cast<std::size_t>(detail::kMaxKernelK) &&
      rs.m >= 1 && reduce_points(family, rs, point_coords);

  if (reduced_ok) {
    report.reduced_tournament = true;
    const detail::FeatureRows data_rows = reduce_rows(data, rs);
    SpanGamePlayer player(family, rs, data_rows, point_coords, n_mc);
    detail::TournamentCoreResult core = detail::run_modified_scheffe(
        family.size(),
        [&player](std::size_t i, std::size_t j, std::uint64_t s) {
          return player(i, j, s);
        },
        derive_stream(tournament_seed, "modified-scheffe"),
        cfg.collect_audit);
    report.winner_index = core.winner_index;
    report.n_games = core.n_games;
    report.audit = std::move(core.audit);
    return LearnResult{family.mixture(core.winner_index), std::move(report)};
  }

  ScheffeOptions opts;
  opts.n_mc = n_mc;
  opts.collect_audit = cfg.collect_audit;
  TournamentResult tr = modified_scheffe(family, data, cfg.eps, cfg.delta,
                                         tournament_seed, opts);
  report.winner_index = tr.winner_index;
  report.n_games = tr.n_games;
  report.audit = std::move(tr.audit);
  return LearnResult{std::move(tr.winner), std::move(report)};
}

LearnResult learn_1d(const std::vector<double>& samples,
                     const EstimatorConfig& cfg) {
  validate_config(cfg);
  if (samples.size() < 4) {
    throw std::invalid_argument("learn_1d: needs at least 4 samples");
  }
  const std::size_t n = samples.size();
  const double dk = static_cast<double>(cfg.k);
  double n_prime_f =
      std::ceil(120.0 * dk * std::log(4.0 * dk / cfg.delta) / cfg.eps);
  std::size_t n_prime = static_cast<std::size_t>(
      std::min(n_prime_f, static_cast<double>(n / 2)));
  n_prime = std::max<std::size_t>(n_prime, 2);

  // Largest seed-sample count whose worst-case family (no duplicate
  // component parameters) stays within the budget.
  const std::size_t budget = cfg.max_candidates > 0
                                 ? cfg.max_candidates
                                 : kDefault1dCandidateBudget;
  {
    const std::vector<double> tuples = make_weight_tuples(
        cfg.k, cfg.eps / (2.0 * dk) * cfg.weight_grid_scale);
    const std::size_t n_w = tuples.size() / cfg.k;
    const auto family_bound = [&](std::size_t np) {
      U128 t = 1;
      const U128 pool = static_cast<U128>(np) * (np - 1);
      for (std::size_t a = 0; a < cfg.k; ++a) t = sat_mul(t, pool);
      return sat_mul(t, n_w);
    };
    while (n_prime > 2 && family_bound(n_prime) > budget) {
      --n_prime;
    }
  }

  const std::vector<double> head(samples.begin(), samples.begin() + n_prime);
  const PairFamily family = build_candidates_1d(
      head, cfg.k, cfg.eps, cfg.delta, cfg.weight_grid_scale, budget);

  Dataset tail;
  tail.n = n - n_prime;
  tail.d = 1;
  tail.samples.assign(samples.begin() + n_prime, samples.end());
  if (tail.n == 0) {
    throw std::invalid_argument(
        "learn_1d: no samples left for selection after candidate "
        "construction");
  }

  ScheffeOptions opts;
  opts.n_mc = cfg.scheffe_n_mc;
  opts.collect_audit = cfg.collect_audit;
  TournamentResult tr =
      modified_scheffe(family, tail, cfg.eps, cfg.delta,
                       derive_stream(cfg.seed, "tournament"), opts);

  LearnReport report;
  report.n_prime = n_prime;
  report.n_candidates = family.size();
  report.n_tournament_rows = tail.n;
  report.n_mc = opts.n_mc > 0 ? opts.n_mc : tail.n;
  report.winner_index = tr.winner_index;
  report.n_games = tr.n_games;
  report.audit = std::move(tr.audit);
  return LearnResult{std::move(tr.winner), std::move(report)};
}

}  // namespace sphmix
