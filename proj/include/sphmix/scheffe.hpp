#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sphmix/model.hpp"

namespace sphmix {

// One pairwise density-comparison game. With A = {x : p(x) > q(x)},
// mu_f, mu_p, mu_q are the empirical masses of A under the data, fresh
// p-samples, and fresh q-samples respectively; the winner is the side
// whose own mass is closer to the data's.
struct GameRecord {
  std::size_t index_p = 0;
  std::size_t index_q = 0;
  double mu_f = 0.0;
  double mu_p = 0.0;
  double mu_q = 0.0;
  std::size_t winner = 0;  // index_p or index_q
};

// Single-line JSON form, one record per line in audit logs.
std::string game_record_to_json(const GameRecord& rec);

// Candidate family addressable by index. Implementations may materialize
// mixtures lazily; `mixture(i)` must be deterministic and all candidates
// must share one dimension.
class CandidateFamily {
 public:
  virtual ~CandidateFamily() = default;
  virtual std::size_t size() const = 0;
  virtual Mixture mixture(std::size_t index) const = 0;
};

// Family backed by an explicit list.
class ExplicitFamily final : public CandidateFamily {
 public:
  explicit ExplicitFamily(std::vector<Mixture> mixtures);
  std::size_t size() const override { return mixtures_.size(); }
  Mixture mixture(std::size_t index) const override;
  const std::vector<Mixture>& items() const { return mixtures_; }

 private:
  std::vector<Mixture> mixtures_;
};

struct ScheffeOptions {
  // Fresh draws per candidate per game for mu_p / mu_q; 0 means "use the
  // number of data rows", matching the selection guarantee's accounting.
  std::size_t n_mc = 0;
  bool collect_audit = false;
};

struct TournamentResult {
  Mixture winner;
  std::size_t winner_index = 0;
  std::size_t n_games = 0;
  std::vector<GameRecord> audit;
};

// One pairwise game between p and q on the given data. mu_p and mu_q come
// from n_mc fresh samples of p and q; |mu_p - mu_f| < |mu_q - mu_f|
// declares p, the reverse declares q, and exact ties go to the lower of
// (index_p, index_q). Deterministic in (p, q, data, n_mc, seed).
GameRecord scheffe_pair(const Mixture& p, const Mixture& q,
                        const Dataset& data, std::size_t n_mc,
                        std::uint64_t seed, std::size_t index_p = 0,
                        std::size_t index_q = 1);

// Near-linear-time selection over the family: random halving rounds where
// pair winners advance (odd rounds give one uniformly chosen survivor a
// bye), a per-round pool of min(|G|, ceil(|F|^(1/3))) survivors whose
// round-robin leader joins the final pool, and a final round-robin that
// returns the candidate with most wins. Ties always break to the lowest
// candidate index. Total games <= |F| (2 log2 |F| + 1).
//
// eps and delta are the accuracy/confidence pair of the selection
// guarantee (they size the caller's data, not the bracket): when the
// family contains a candidate within L1 distance eps of the source and
// n >= (10 / eps^2) log(|F| / delta), the selected candidate is within
// 1000 * max(eps, d_F) with probability 1 - delta.
TournamentResult modified_scheffe(const CandidateFamily& family,
                                  const Dataset& data, double eps,
                                  double delta, std::uint64_t seed,
                                  const ScheffeOptions& opts = {});

// Confidence amplification for small delta: repeats the tournament
// ceil(log3(1/delta)) times at constant error and re-selects among the
// round winners with a final round-robin. Intended when delta is below
// what a single run supports.
TournamentResult modified_scheffe_amplified(const CandidateFamily& family,
                                            const Dataset& data, double eps,
                                            double delta, std::uint64_t seed,
                                            const ScheffeOptions& opts = {});

}  // namespace sphmix
