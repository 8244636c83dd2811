#include "tksk/match.hpp"

#include <algorithm>
#include <cmath>

namespace tksk {

namespace {

// Ordinals into q.keywords of the query words present at each place.
std::vector<std::vector<std::uint32_t>> resolveOrdinals(
    const Query& q, const Trajectory& traj) {
  std::vector<std::vector<std::uint32_t>> member(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const Place& p = traj.places()[i];
    for (std::uint32_t j = 0; j < q.keywords.size(); ++j) {
      if (p.hasKeyword(q.keywords[j])) member[i].push_back(j);
    }
  }
  return member;
}

std::vector<Point> gatherPoints(const Trajectory& traj) {
  std::vector<Point> pts;
  pts.reserve(traj.size());
  for (const Place& p : traj.places()) pts.push_back(p.location());
  return pts;
}

}  // namespace

MatchResult naiveMinMatchDist(const Query& q, const Trajectory& traj) {
  const std::vector<Point> pts = gatherPoints(traj);
  const auto member = resolveOrdinals(q, traj);
  const std::size_t n = pts.size();
  const std::size_t need = q.keywords.size();

  MatchResult best;
  best.trajId = traj.id();
  std::vector<std::uint32_t> counts(need);
  for (std::size_t s = 0; s < n; ++s) {
    std::fill(counts.begin(), counts.end(), 0u);
    std::size_t covered = 0;
    double path = 0.0;  // accumulated left to right, same as windowDistance
    const double dqs = dist(q.location, pts[s]);
    for (std::size_t e = s; e < n; ++e) {
      if (e > s) path += dist(pts[e - 1], pts[e]);
      for (std::uint32_t ord : member[e]) {
        if (counts[ord]++ == 0) ++covered;
      }
      if (covered < need) continue;
      const double d = std::min(dqs, dist(q.location, pts[e])) + path;
      if (d < best.distance) {
        best.distance = d;
        best.s = static_cast<PlaceIndex>(s + 1);
        best.e = static_cast<PlaceIndex>(e + 1);
      }
    }
  }
  return best;
}

std::vector<std::pair<PlaceIndex, PlaceIndex>> enumerateMinimumMatches(
    const Query& q, const Trajectory& traj) {
  const auto member = resolveOrdinals(q, traj);
  const std::size_t n = traj.size();
  const std::size_t need = q.keywords.size();

  std::vector<std::pair<PlaceIndex, PlaceIndex>> out;
  std::vector<std::uint32_t> counts(need);
  std::size_t covered = 0;
  std::size_t b = 0;
  auto add = [&](std::size_t i) {
    for (std::uint32_t ord : member[i]) {
      if (counts[ord]++ == 0) ++covered;
    }
  };
  auto remove = [&](std::size_t i) {
    for (std::uint32_t ord : member[i]) {
      if (--counts[ord] == 0) --covered;
    }
  };
  // Whenever the maximal matching start advances for a new right endpoint,
  // that (start, end) pair is a minimal matching window.
  for (std::size_t e = 0; e < n; ++e) {
    add(e);
    while (covered == need) {
      bool removable = true;
      for (std::uint32_t ord : member[b]) {
        if (counts[ord] == 1) {
          removable = false;
          break;
        }
      }
      if (removable) {
        remove(b);
        ++b;
        continue;
      }
      out.emplace_back(static_cast<PlaceIndex>(b + 1),
                       static_cast<PlaceIndex>(e + 1));
      remove(b);
      ++b;
    }
  }
  return out;
}

MatchResult matchMinDistView(
    const Point& queryLocation, std::size_t queryWordCount,
    std::span<const Point> places,
    const std::vector<std::vector<std::uint32_t>>& member, double threshold,
    MatchStats* stats) {
  const std::size_t n = places.size();
  const std::size_t need = queryWordCount;

  MatchResult best;
  if (need == 0 || n == 0) return best;

  std::vector<std::uint32_t> counts(need);
  std::size_t covered = 0;
  std::uint64_t updates = 0;
  std::uint64_t evaluated = 0;

  auto add = [&](std::size_t i) {
    updates += member[i].size();
    for (std::uint32_t ord : member[i]) {
      if (counts[ord]++ == 0) ++covered;
    }
  };
  auto remove = [&](std::size_t i) {
    updates += member[i].size();
    for (std::uint32_t ord : member[i]) {
      if (--counts[ord] == 0) --covered;
    }
  };

  // A window whose distance lower bound exceeds the threshold by more than
  // this slack cannot hold a result the caller cares about. The slack absorbs
  // rounding drift in the running path sum so pruning can never discard a
  // window whose exactly-evaluated distance would still be <= threshold.
  const double pruneLimit =
      std::isinf(threshold) ? threshold
                            : threshold + 1e-7 * (1.0 + std::abs(threshold));

  std::vector<double> distQ(n);
  std::size_t b = 0;      // left edge of the window, 0-based
  double pathRun = 0.0;   // running path length of [b, e]
  for (std::size_t e = 0; e < n; ++e) {
    distQ[e] = dist(queryLocation, places[e]);
    // Pruning: any window through a place farther than the threshold is out
    // of reach, so restart the window beyond it.
    if (distQ[e] > pruneLimit) {
      for (std::size_t i = b; i < e; ++i) {
        if (!member[i].empty()) remove(i);
      }
      b = e + 1;
      pathRun = 0.0;
      continue;
    }
    if (b < e) {
      pathRun += dist(places[e - 1], places[e]);
    } else {
      pathRun = 0.0;  // the window restarts at e
    }
    add(e);
    // Pruning: windows starting at b and ending at or beyond e all cost at
    // least this lower bound; drop the left place when it cannot pay off.
    if (b < e && covered < need &&
        std::min(distQ[b], distQ[e]) + pathRun > pruneLimit) {
      remove(b);
      pathRun -= dist(places[b], places[b + 1]);
      ++b;
    }
    while (covered == need) {
      bool removable = true;
      for (std::uint32_t ord : member[b]) {
        if (counts[ord] == 1) {
          removable = false;
          break;
        }
      }
      if (!removable) {
        // [b, e] is a minimal matching window; evaluate it with the shared
        // left-to-right summation so the value is bit-identical to the
        // reference scan.
        ++evaluated;
        const double d = windowDistance(queryLocation, places, b, e);
        if (d < best.distance) {
          best.distance = d;
          best.s = static_cast<PlaceIndex>(b + 1);
          best.e = static_cast<PlaceIndex>(e + 1);
        }
        // No later window may extend this match to the right (its distance
        // could only grow), so advance past the left edge and move on.
      }
      remove(b);
      if (b < e) pathRun -= dist(places[b], places[b + 1]);
      ++b;
    }
    // Once the tail b..n cannot cover the query there is nothing left to
    // find; the loop simply runs out of places, which is the same exit.
  }

  if (stats != nullptr) {
    stats->counterUpdates += updates;
    stats->windowsEvaluated += evaluated;
  }
  return best;
}

MatchResult matchMinDist(const Query& q, const Trajectory& traj,
                         double threshold, MatchStats* stats) {
  const std::vector<Point> pts = gatherPoints(traj);
  const auto member = resolveOrdinals(q, traj);
  MatchResult r = matchMinDistView(q.location, q.keywords.size(), pts, member,
                                   threshold, stats);
  r.trajId = traj.id();
  return r;
}

}  // namespace tksk
