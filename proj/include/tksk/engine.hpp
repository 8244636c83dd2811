#ifndef TKSK_ENGINE_HPP
#define TKSK_ENGINE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tksk/bck_index.hpp"
#include "tksk/model.hpp"

namespace tksk {

struct QueryCounters {
  std::uint64_t rounds = 0;        // window expansions, initial round included
  std::uint64_t postingCells = 0;  // (word, cell) postings scanned
  std::uint64_t candidates = 0;    // distinct trajectories handed to Match
  std::uint64_t matchCalls = 0;    // Match kernel invocations
};

// How each expansion round retrieves candidates. Cumulative re-scans the
// whole current window, which keeps retrieval complete regardless of where a
// trajectory's keyword cells fall; Ring scans only the newly added ring with
// cell-grouped filtering and interval shrinking, trading completeness for
// fewer posting scans (benchmarking only).
enum class ExpansionMode { kCumulative, kRing };

// Search radius that probabilistically captures k matching trajectories,
// clamped to [smallest leaf side, bounds diagonal]. nullopt signals a
// provably empty answer (no trajectories, or a query word with zero
// document frequency).
std::optional<double> initialRadius(const Query& q, const BckIndex& index);

// Trajectory ids whose postings cover every query word somewhere within the
// given intervals, ascending. Words are processed in ascending document
// frequency so infrequent words prune early.
std::vector<TrajId> ctr(const Query& q, std::span<const ZInterval> intervals,
                        const BckIndex& index,
                        QueryCounters* counters = nullptr);

// Top-k search by incremental window expansion over the index. Results are
// exact under the cumulative mode: identical (trajId, distance) multisets to
// a full scan, witnesses are minimum matches.
TopKAnswer topK(const Query& q, const BckIndex& index,
                ExpansionMode mode = ExpansionMode::kCumulative,
                QueryCounters* counters = nullptr);

}  // namespace tksk

#endif  // TKSK_ENGINE_HPP
