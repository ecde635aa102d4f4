#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sphmix/scheffe.hpp"

// Tournament control flow, separated from game evaluation so callers can
// plug in specialized pairwise-game implementations (plain mixtures,
// reduced feature-space candidates, ...) while sharing one bracket.

namespace sphmix::detail {

// Plays one pairwise game between candidates i and j; `game_seed` is the
// game's private randomness. Must return a record with
// winner in {i, j}, index_p = i, index_q = j.
using GamePlayer = std::function<GameRecord(
    std::size_t i, std::size_t j, std::uint64_t game_seed)>;

struct TournamentCoreResult {
  std::size_t winner_index = 0;
  std::size_t n_games = 0;
  std::vector<GameRecord> audit;
};

// Halving tournament with per-round representative pools and a final
// round-robin. Pairings, byes, pool draws, and game seeds depend only on
// (seed, round, slot), so games within a round are independent and the
// result is reproducible for any execution order. All win-count and margin
// ties break to the lowest candidate index.
TournamentCoreResult run_modified_scheffe(std::size_t family_size,
                                          const GamePlayer& play,
                                          std::uint64_t seed,
                                          bool collect_audit);

}  // namespace sphmix::detail
