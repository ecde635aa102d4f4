#include "sphmix/scheffe.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sphmix/detail/kernel.hpp"
#include "sphmix/detail/tournament.hpp"
#include "sphmix/rng.hpp"

namespace sphmix {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

std::size_t decide_winner(double mu_f, double mu_p, double mu_q,
                          std::size_t index_p, std::size_t index_q) {
  const double dp = std::abs(mu_p - mu_f);
  const double dq = std::abs(mu_q - mu_f);
  if (dp < dq) return index_p;
  if (dq < dp) return index_q;
  return std::min(index_p, index_q);
}

std::size_t count_p_gt_q_generic(const Mixture& p, const Mixture& q,
                                 const Dataset& data) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < data.n; ++i) {
    const double* x = data.row(i);
    count += p.log_pdf(x) > q.log_pdf(x) ? 1u : 0u;
  }
  return count;
}

detail::KernelCandidate kernel_from_1d(const Mixture& m) {
  detail::KernelCandidate cand;
  cand.k = static_cast<int>(m.k());
  for (std::size_t c = 0; c < m.k(); ++c) {
    const double v = m.variance(c);
    cand.comp[c].base =
        std::log(m.weight(c)) - 0.5 * (kLogTwoPi + std::log(v));
    cand.comp[c].iv = 1.0 / (2.0 * v);
    cand.comp[c].g[0] = m.mean(c)[0];
  }
  return cand;
}

detail::FeatureRows rows_from_1d(const Dataset& data) {
  detail::FeatureRows rows = detail::FeatureRows::with_capacity(1, data.n);
  for (std::size_t i = 0; i < data.n; ++i) {
    rows.push_row(data.row(i), 0.0);
  }
  return rows;
}

// Plays family games on shared data. One-dimensional candidates with few
// components run through the reduced-feature kernel (same draws, faster
// density comparison); everything else goes through scheffe_pair.
class MixtureGamePlayer {
 public:
  MixtureGamePlayer(const CandidateFamily& family, const Dataset& data,
                    std::size_t n_mc)
      : family_(family), data_(data), n_mc_(n_mc) {
    if (data.d == 1) data_rows_ = rows_from_1d(data);
  }

  GameRecord operator()(std::size_t i, std::size_t j, std::uint64_t seed) {
    const Mixture p = family_.mixture(i);
    const Mixture q = family_.mixture(j);
    if (data_.d == 1 && p.k() <= detail::kMaxKernelK &&
        q.k() <= detail::kMaxKernelK) {
      return kernel_game(p, q, i, j, seed);
    }
    return scheffe_pair(p, q, data_, n_mc_, seed, i, j);
  }

 private:
  GameRecord kernel_game(const Mixture& p, const Mixture& q, std::size_t i,
                         std::size_t j, std::uint64_t seed) const {
    const detail::KernelCandidate kp = kernel_from_1d(p);
    const detail::KernelCandidate kq = kernel_from_1d(q);
    GameRecord rec;
    rec.index_p = i;
    rec.index_q = j;
    rec.mu_f =
        static_cast<double>(detail::count_first_gt(data_rows_, kp, kq)) /
        static_cast<double>(data_.n);
    const detail::FeatureRows ps =
        rows_from_1d(p.sample(n_mc_, derive_stream(seed, "p-draws")));
    rec.mu_p = static_cast<double>(detail::count_first_gt(ps, kp, kq)) /
               static_cast<double>(n_mc_);
    const detail::FeatureRows qs =
        rows_from_1d(q.sample(n_mc_, derive_stream(seed, "q-draws")));
    rec.mu_q = static_cast<double>(detail::count_first_gt(qs, kp, kq)) /
               static_cast<double>(n_mc_);
    rec.winner = decide_winner(rec.mu_f, rec.mu_p, rec.mu_q, i, j);
    return rec;
  }

  const CandidateFamily& family_;
  const Dataset& data_;
  std::size_t n_mc_;
  detail::FeatureRows data_rows_;
};

void validate_selection_args(const CandidateFamily& family,
                             const Dataset& data, double eps, double delta) {
  if (family.size() == 0) {
    throw std::invalid_argument("modified_scheffe: empty candidate family");
  }
  if (data.n == 0) {
    throw std::invalid_argument("modified_scheffe: empty data");
  }
  if (!(eps > 0.0)) {
    throw std::invalid_argument("modified_scheffe: eps must be positive");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("modified_scheffe: delta must be in (0,1)");
  }
}

}  // namespace

std::string game_record_to_json(const GameRecord& rec) {
  nlohmann::json j;
  j["index_p"] = rec.index_p;
  j["index_q"] = rec.index_q;
  j["mu_f"] = rec.mu_f;
  j["mu_p"] = rec.mu_p;
  j["mu_q"] = rec.mu_q;
  j["winner"] = rec.winner;
  return j.dump();
}

ExplicitFamily::ExplicitFamily(std::vector<Mixture> mixtures)
    : mixtures_(std::move(mixtures)) {
  if (mixtures_.empty()) {
    throw std::invalid_argument("ExplicitFamily: at least one candidate");
  }
  for (const Mixture& m : mixtures_) {
    if (m.dim() != mixtures_.front().dim()) {
      throw std::invalid_argument("ExplicitFamily: mixed dimensions");
    }
  }
}

Mixture ExplicitFamily::mixture(std::size_t index) const {
  if (index >= mixtures_.size()) {
    throw std::out_of_range("ExplicitFamily: index out of range");
  }
  return mixtures_[index];
}

GameRecord scheffe_pair(const Mixture& p, const Mixture& q,
                        const Dataset& data, std::size_t n_mc,
                        std::uint64_t seed, std::size_t index_p,
                        std::size_t index_q) {
  if (p.dim() != q.dim() || p.dim() != data.d) {
    throw std::invalid_argument("scheffe_pair: dimension mismatch");
  }
  if (data.n == 0) throw std::invalid_argument("scheffe_pair: empty data");
  if (n_mc == 0) throw std::invalid_argument("scheffe_pair: n_mc >= 1");
  GameRecord rec;
  rec.index_p = index_p;
  rec.index_q = index_q;
  rec.mu_f = static_cast<double>(count_p_gt_q_generic(p, q, data)) /
             static_cast<double>(data.n);
  const Dataset ps = p.sample(n_mc, derive_stream(seed, "p-draws"));
  rec.mu_p = static_cast<double>(count_p_gt_q_generic(p, q, ps)) /
             static_cast<double>(n_mc);
  const Dataset qs = q.sample(n_mc, derive_stream(seed, "q-draws"));
  rec.mu_q = static_cast<double>(count_p_gt_q_generic(p, q, qs)) /
             static_cast<double>(n_mc);
  rec.winner = decide_winner(rec.mu_f, rec.mu_p, rec.mu_q, index_p, index_q);
  return rec;
}

TournamentResult modified_scheffe(const CandidateFamily& family,
                                  const Dataset& data, double eps,
                                  double delta, std::uint64_t seed,
                                  const ScheffeOptions& opts) {
  validate_selection_args(family, data, eps, delta);
  const std::size_t n_mc = opts.n_mc > 0 ? opts.n_mc : data.n;
  MixtureGamePlayer player(family, data, n_mc);
  detail::TournamentCoreResult core = detail::run_modified_scheffe(
      family.size(),
      [&player](std::size_t i, std::size_t j, std::uint64_t s) {
        return player(i, j, s);
      },
      derive_stream(seed, "modified-scheffe"), opts.collect_audit);
  return TournamentResult{family.mixture(core.winner_index),
                          core.winner_index, core.n_games,
                          std::move(core.audit)};
}

TournamentResult modified_scheffe_amplified(const CandidateFamily& family,
                                            const Dataset& data, double eps,
                                            double delta, std::uint64_t seed,
                                            const ScheffeOptions& opts) {
  validate_selection_args(family, data, eps, delta);
  const auto reps = static_cast<std::size_t>(
      std::max(1.0, std::ceil(std::log(1.0 / delta) / std::log(3.0))));
  std::vector<std::size_t> winners;
  std::size_t games = 0;
  ScheffeOptions inner = opts;
  inner.collect_audit = false;
  for (std::size_t r = 0; r < reps; ++r) {
    TournamentResult t = modified_scheffe(
        family, data, eps, 1.0 / 3.0, derive_stream(seed, "amplify", r),
        inner);
    games += t.n_games;
    if (std::find(winners.begin(), winners.end(), t.winner_index) ==
        winners.end()) {
      winners.push_back(t.winner_index);
    }
  }
  // Re-select among the repetition winners; the audit (if requested)
  // covers this selection round only.
  const std::size_t n_mc = opts.n_mc > 0 ? opts.n_mc : data.n;
  MixtureGamePlayer player(family, data, n_mc);
  std::vector<std::size_t> wins(winners.size(), 0);
  std::vector<GameRecord> audit;
  for (std::size_t a = 0; a < winners.size(); ++a) {
    for (std::size_t b = a + 1; b < winners.size(); ++b) {
      const GameRecord rec = player(
          winners[a], winners[b], derive_stream(seed, "amplify-final", a, b));
      ++games;
      if (opts.collect_audit) audit.push_back(rec);
      ++wins[rec.winner == winners[a] ? a : b];
    }
  }
  std::size_t best = 0;
  for (std::size_t a = 1; a < winners.size(); ++a) {
    if (wins[a] > wins[best] ||
        (wins[a] == wins[best] && winners[a] < winners[best])) {
      best = a;
    }
  }
  return TournamentResult{family.mixture(winners[best]), winners[best], games,
                          std::move(audit)};
}

}  // namespace sphmix
