#include "sphmix/detail/tournament.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <utility>

#include "sphmix/rng.hpp"

namespace sphmix::detail {
namespace {

std::size_t cbrt_ceil(std::size_t n) {
  std::size_t r = 1;
  while (r * r * r < n) ++r;
  return r;
}

// Position of the round-robin leader; win-count ties break to the lowest
// candidate index.
std::size_t leader_position(const std::vector<std::size_t>& members,
                            const std::vector<std::size_t>& wins) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < members.size(); ++a) {
    if (wins[a] > wins[best] ||
        (wins[a] == wins[best] && members[a] < members[best])) {
      best = a;
    }
  }
  return best;
}

}  // namespace

TournamentCoreResult run_modified_scheffe(std::size_t family_size,
                                          const GamePlayer& play,
                                          std::uint64_t seed,
                                          bool collect_audit) {
  if (family_size == 0) {
    throw std::invalid_argument("tournament: empty candidate family");
  }
  TournamentCoreResult res;
  if (family_size == 1) return res;

  const std::size_t pool_target = cbrt_ceil(family_size);
  std::vector<std::size_t> survivors(family_size);
  std::iota(survivors.begin(), survivors.end(), std::size_t{0});
  std::vector<std::size_t> final_pool;

  const auto run_game = [&](std::size_t i, std::size_t j,
                            std::uint64_t game_seed) {
    const GameRecord rec = play(i, j, game_seed);
    ++res.n_games;
    if (collect_audit) res.audit.push_back(rec);
    return rec.winner;
  };

  for (std::size_t round = 0; survivors.size() > 1; ++round) {
    RngStream pair_rng(derive_stream(seed, "pairing", round));
    pair_rng.shuffle(survivors.data(), survivors.size());
    std::vector<std::size_t> next;
    next.reserve(survivors.size() / 2 + 1);
    for (std::size_t s = 0; s + 1 < survivors.size(); s += 2) {
      next.push_back(run_game(survivors[s], survivors[s + 1],
                              derive_stream(seed, "game", round, s / 2)));
    }
    if (survivors.size() % 2 == 1) {
      // After a uniform shuffle the unpaired last element is a uniformly
      // chosen survivor; it advances with a bye.
      next.push_back(survivors.back());
    }
    survivors = std::move(next);

    // Representative pool: uniform draw without replacement from the new
    // survivor set, round-robin, leader joins the final pool.
    const std::size_t pool_size = std::min(survivors.size(), pool_target);
    std::vector<std::size_t> pool = survivors;
    RngStream pool_rng(derive_stream(seed, "pool", round));
    for (std::size_t a = 0; a < pool_size; ++a) {
      const std::size_t b =
          a + static_cast<std::size_t>(pool_rng.uniform_below(pool.size() - a));
      std::swap(pool[a], pool[b]);
    }
    pool.resize(pool_size);
    std::vector<std::size_t> wins(pool_size, 0);
    for (std::size_t a = 0; a < pool_size; ++a) {
      for (std::size_t b = a + 1; b < pool_size; ++b) {
        const std::size_t w = run_game(
            pool[a], pool[b], derive_stream(seed, "pool-game", round, a, b));
        ++wins[w == pool[a] ? a : b];
      }
    }
    const std::size_t rep = pool[leader_position(pool, wins)];
    if (std::find(final_pool.begin(), final_pool.end(), rep) ==
        final_pool.end()) {
      final_pool.push_back(rep);
    }
  }

  std::vector<std::size_t> wins(final_pool.size(), 0);
  for (std::size_t a = 0; a < final_pool.size(); ++a) {
    for (std::size_t b = a + 1; b < final_pool.size(); ++b) {
      const std::size_t w = run_game(final_pool[a], final_pool[b],
                                     derive_stream(seed, "final", a, b));
      ++wins[w == final_pool[a] ? a : b];
    }
  }
  res.winner_index = final_pool[leader_position(final_pool, wins)];
  return res;
}

}  // namespace sphmix::detail
