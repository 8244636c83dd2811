#ifndef TKSK_MATCH_HPP
#define TKSK_MATCH_HPP

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tksk/model.hpp"

namespace tksk {

struct MatchStats {
  // Increments plus decrements applied to the per-keyword counters. The
  // sliding window touches each place's keyword list at most twice, so this
  // stays <= 2 * sum(|L_i.psi| restricted to query words).
  std::uint64_t counterUpdates = 0;
  // Windows whose distance was actually evaluated.
  std::uint64_t windowsEvaluated = 0;
};

// Reference implementation: evaluates every window (s, e) in O(n^2) and
// returns the minimum distance with its lexicographically smallest witness.
MatchResult naiveMinMatchDist(const Query& q, const Trajectory& traj);

// All minimal matching windows, ascending in (s, e): windows that cover the
// query keywords while no properly contained window does.
std::vector<std::pair<PlaceIndex, PlaceIndex>> enumerateMinimumMatches(
    const Query& q, const Trajectory& traj);

// Linear sliding-window computation of the minimum match distance, pruned
// against `threshold`. Guarantees: the result never undercuts the true
// minimum m*; whenever m* <= threshold the result equals m* exactly and the
// witness is a minimal matching window. threshold may be +infinity.
MatchResult matchMinDist(const Query& q, const Trajectory& traj,
                         double threshold, MatchStats* stats = nullptr);

// Same kernel on a pre-resolved view: place coordinates plus, per place, the
// ordinals (0-based positions in q.keywords) of the query words it contains.
// Used by index-backed search paths that reconstruct keyword membership from
// postings instead of raw keyword sets.
MatchResult matchMinDistView(
    const Point& queryLocation, std::size_t queryWordCount,
    std::span<const Point> places,
    const std::vector<std::vector<std::uint32_t>>& wordOrdinalsPerPlace,
    double threshold, MatchStats* stats = nullptr);

}  // namespace tksk

#endif  // TKSK_MATCH_HPP
