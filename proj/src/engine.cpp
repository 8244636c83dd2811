#include "tksk/engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "tksk/match.hpp"
#include "tksk/topk.hpp"

namespace tksk {

namespace {

std::uint32_t dfOf(const BckIndex& index, WordId w) {
  return w < index.vocab().size() ? index.vocab().df(w) : 0;
}

// Query words in ascending (document frequency, wordId) order.
std::vector<WordId> wordsByFrequency(const Query& q, const BckIndex& index) {
  std::vector<WordId> words = q.keywords;
  std::sort(words.begin(), words.end(), [&](WordId a, WordId b) {
    return std::pair(dfOf(index, a), a) < std::pair(dfOf(index, b), b);
  });
  return words;
}

// Scores one candidate against the index and offers it to the collector.
void scoreCandidate(const Query& q, const BckIndex& index, TrajId t,
                    TopKCollector& results, QueryCounters* counters) {
  const double vk = results.threshold();
  const auto points = index.trajectoryPoints(t);
  const auto postings = index.placePostings(t, q.keywords);
  std::vector<std::vector<std::uint32_t>> ordinals(points.size());
  for (std::size_t wi = 0; wi < postings.size(); ++wi) {
    for (PlaceIndex p : postings[wi]) {
      ordinals[p - 1].push_back(static_cast<std::uint32_t>(wi));
    }
  }
  if (counters != nullptr) ++counters->matchCalls;
  MatchResult res =
      matchMinDistView(q.location, q.keywords.size(), points, ordinals, vk);
  res.trajId = t;
  results.offer(res);
}

BoundingBox squareWindow(const Point& center, double halfSide) {
  return BoundingBox{center.x - halfSide, center.y - halfSide,
                     center.x + halfSide, center.y + halfSide};
}

bool covers(const BoundingBox& outer, const BoundingBox& inner) {
  return outer.minX <= inner.minX && outer.minY <= inner.minY &&
         outer.maxX >= inner.maxX && outer.maxY >= inner.maxY;
}

// Code ranges of `a` not covered by `b`; both sorted and disjoint.
std::vector<ZInterval> subtractIntervals(std::span<const ZInterval> a,
                                         std::span<const ZInterval> b) {
  std::vector<ZInterval> out;
  std::size_t j = 0;
  for (const ZInterval& iv : a) {
    CellCode lo = iv.sid;
    while (j < b.size() && b[j].eid < lo) ++j;
    std::size_t k = j;
    while (k < b.size() && b[k].sid <= iv.eid) {
      if (b[k].sid > lo) out.push_back(ZInterval{lo, b[k].sid - 1});
      lo = b[k].eid + 1;
      if (lo > iv.eid) break;
      ++k;
    }
    if (lo <= iv.eid) out.push_back(ZInterval{lo, iv.eid});
  }
  return out;
}

// Paper-shaped ring retrieval: candidates grouped by the cell that produced
// them; a word missing from a cell drops the whole group, and each interval
// shrinks to the code range its found cells span.
std::vector<TrajId> ctrRing(const Query& q,
                            std::span<const ZInterval> intervals,
                            const BckIndex& index, QueryCounters* counters) {
  std::vector<ZInterval> live(intervals.begin(), intervals.end());
  std::map<CellCode, std::vector<TrajId>> byCell;
  const auto words = wordsByFrequency(q, index);
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    std::vector<ZInterval> nextLive;
    std::set<CellCode> found;
    for (const ZInterval& iv : live) {
      const auto scan = index.getCellsInInterval(words[wi], iv);
      if (counters != nullptr) counters->postingCells += scan.cells.size();
      if (!scan.shrunk.has_value()) continue;  // interval removed
      nextLive.push_back(*scan.shrunk);
      for (const auto& cell : scan.cells) {
        found.insert(cell.cell);
        if (wi == 0) {
          auto& group = byCell[cell.cell];
          group.insert(group.end(), cell.trajIds.begin(),
                       cell.trajIds.end());
        }
      }
    }
    live = std::move(nextLive);
    if (wi > 0) {
      for (auto it = byCell.begin(); it != byCell.end();) {
        it = found.contains(it->first) ? std::next(it) : byCell.erase(it);
      }
    }
    if (byCell.empty()) return {};
  }
  std::vector<TrajId> out;
  for (const auto& [cell, trajs] : byCell) {
    out.insert(out.end(), trajs.begin(), trajs.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

std::optional<double> initialRadius(const Query& q, const BckIndex& index) {
  const std::uint32_t n = index.trajectoryCount();
  if (n == 0) return std::nullopt;
  double p = 1.0;
  for (WordId w : q.keywords) {
    const std::uint32_t df = dfOf(index, w);
    if (df == 0) return std::nullopt;
    p *= static_cast<double>(df) / n;
  }
  const double area = index.spaceArea();
  const double pi = 3.14159265358979323846;
  double r = std::sqrt(q.k * area / (pi * n * p));
  const double tau = index.grid().smallestLeafSide();
  const double diagonal = index.grid().side() * std::sqrt(2.0);
  return std::clamp(r, tau, diagonal);
}

std::vector<TrajId> ctr(const Query& q, std::span<const ZInterval> intervals,
                        const BckIndex& index, QueryCounters* counters) {
  std::vector<TrajId> survivors;
  const auto words = wordsByFrequency(q, index);
  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    std::vector<TrajId> found;
    for (const ZInterval& iv : intervals) {
      const auto scan = index.getCellsInInterval(words[wi], iv);
      if (counters != nullptr) counters->postingCells += scan.cells.size();
      for (const auto& cell : scan.cells) {
        if (wi == 0) {
          found.insert(found.end(), cell.trajIds.begin(),
                       cell.trajIds.end());
        } else {
          for (TrajId t : cell.trajIds) {
            if (std::binary_search(survivors.begin(), survivors.end(), t)) {
              found.push_back(t);
            }
          }
        }
      }
    }
    std::sort(found.begin(), found.end());
    found.erase(std::unique(found.begin(), found.end()), found.end());
    survivors = std::move(found);
    if (survivors.empty()) break;
  }
  return survivors;
}

TopKAnswer topK(const Query& q, const BckIndex& index, ExpansionMode mode,
                QueryCounters* counters) {
  const auto r0 = initialRadius(q, index);
  if (!r0.has_value()) return {};

  const Grid& grid = index.grid();
  const double tau = grid.smallestLeafSide();
  double rq = *r0;
  TopKCollector results(q.k);
  std::vector<bool> seen(index.trajectoryCount(), false);
  std::vector<ZInterval> prevIntervals;

  for (;;) {
    if (counters != nullptr) ++counters->rounds;
    const BoundingBox window = squareWindow(q.location, rq);
    const bool exhausted = covers(window, grid.bounds());
    auto intervals = grid.windowToIntervals(window);

    std::vector<TrajId> candidates;
    if (mode == ExpansionMode::kRing) {
      const auto ring = subtractIntervals(intervals, prevIntervals);
      prevIntervals = std::move(intervals);
      candidates = ctrRing(q, ring, index, counters);
    } else {
      candidates = ctr(q, intervals, index, counters);
    }

    for (TrajId t : candidates) {
      if (seen[t]) continue;
      seen[t] = true;
      if (counters != nullptr) ++counters->candidates;
      scoreCandidate(q, index, t, results, counters);
    }

    if (results.threshold() < rq || exhausted) break;
    rq += tau;
  }
  return results.drain();
}

}  // namespace tksk
