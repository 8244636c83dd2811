#ifndef TKSK_BCK_INDEX_HPP
#define TKSK_BCK_INDEX_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tksk/grid.hpp"
#include "tksk/model.hpp"

namespace tksk {

// ---------------------------------------------------------------------------
// Ordered key-value store. Keys are fixed-width big-endian byte composites so
// plain lexicographic byte order realizes the logical (first, second) order;
// lookups are seek + forward scan, the access pattern every query path uses.
// ---------------------------------------------------------------------------

template <std::size_t KeyLen, typename Value>
class OrderedKv {
 public:
  using Key = std::array<std::uint8_t, KeyLen>;
  using Entry = std::pair<Key, Value>;

  // Index of the first entry with key >= k (entries().size() if none).
  std::size_t seek(const Key& k) const {
    std::size_t lo = 0, hi = entries_.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (entries_[mid].first < k) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo;
  }

  const Value* find(const Key& k) const {
    const std::size_t i = seek(k);
    if (i < entries_.size() && entries_[i].first == k) {
      return &entries_[i].second;
    }
    return nullptr;
  }

  Value* find(const Key& k) {
    return const_cast<Value*>(std::as_const(*this).find(k));
  }

  // Value under k, inserted empty at its sorted position when absent.
  Value& obtain(const Key& k) {
    const std::size_t i = seek(k);
    if (i == entries_.size() || !(entries_[i].first == k)) {
      entries_.insert(entries_.begin() + static_cast<std::ptrdiff_t>(i),
                      Entry{k, Value{}});
    }
    return entries_[i].second;
  }

  void erase(const Key& k) {
    const std::size_t i = seek(k);
    if (i < entries_.size() && entries_[i].first == k) {
      entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
    }
  }

  const std::vector<Entry>& entries() const { return entries_; }

  static OrderedKv fromSorted(std::vector<Entry> entries) {
    OrderedKv kv;
    kv.entries_ = std::move(entries);
    return kv;
  }

  bool operator==(const OrderedKv&) const = default;

 private:
  std::vector<Entry> entries_;  // sorted ascending by key
};

// Component 1 key: wordId then cell base code. Component 2: trajId then
// wordId.
using C1Key = std::array<std::uint8_t, 12>;
using C2Key = std::array<std::uint8_t, 8>;

C1Key c1Key(WordId word, CellCode cell);
C2Key c2Key(TrajId traj, WordId word);
std::pair<WordId, CellCode> decodeC1Key(const C1Key& k);
std::pair<TrajId, WordId> decodeC2Key(const C2Key& k);

using Component1 = OrderedKv<12, std::vector<TrajId>>;
using Component2 = OrderedKv<8, std::vector<PlaceIndex>>;

// ---------------------------------------------------------------------------
// Vocabulary: dense word ids in first-seen order, with two usage counters —
// df at trajectory granularity and the count of places carrying the word.
// ---------------------------------------------------------------------------

class Vocabulary {
 public:
  WordId intern(const std::string& word);
  std::optional<WordId> find(const std::string& word) const;
  const std::string& word(WordId id) const;
  std::size_t size() const { return words_.size(); }

  std::uint32_t df(WordId id) const;
  std::uint64_t placeOccurrences(WordId id) const;

  // Grows the id space up to `count` words, naming unseen ids "w<id>". Lets
  // id-only corpora (tests) skip explicit string interning.
  void ensureIds(std::size_t count);

  void bumpDf(WordId id) { ++dfs_.at(id); }
  void bumpPlaceOccurrences(WordId id) { ++placeOccs_.at(id); }

  // Reassembles from serialized parts; rejects duplicate words and
  // mismatched counter lengths with std::invalid_argument.
  static Vocabulary restore(std::vector<std::string> words,
                            std::vector<std::uint32_t> dfs,
                            std::vector<std::uint64_t> placeOccs);

  bool operator==(const Vocabulary& other) const {
    return words_ == other.words_ && dfs_ == other.dfs_ &&
           placeOccs_ == other.placeOccs_;
  }

 private:
  std::vector<std::string> words_;
  std::vector<std::uint32_t> dfs_;
  std::vector<std::uint64_t> placeOccs_;
  std::unordered_map<std::string, WordId> byName_;
};

// ---------------------------------------------------------------------------
// Fragment word association.
// ---------------------------------------------------------------------------

enum class WordPolicy : std::uint32_t {
  kPlain = 0,          // every fragment keeps its own words
  kNeighborUnion = 1,  // even ordinals absorb both adjacent fragments
  kPrefix = 2,         // even ordinals absorb the whole preceding prefix
};

// Input: per-fragment raw word sets (sorted, deduplicated), ordered by
// ordinal 1..m. Output: the associated word set per fragment. Odd ordinals
// always keep their own words; the policy decides what even ordinals absorb.
std::vector<std::vector<WordId>> associateFragmentWords(
    const std::vector<std::vector<WordId>>& rawWords, WordPolicy policy);

// ---------------------------------------------------------------------------
// The index: Component 1 ((word, cell) -> trajectory postings over
// associated fragment words), Component 2 ((traj, word) -> place indices),
// the adaptive grid, vocabulary, and corpus geometry.
// ---------------------------------------------------------------------------

struct IndexStats {
  std::uint32_t trajectoryCount = 0;
  std::uint64_t placeCount = 0;
  std::uint64_t keywordSlotCount = 0;  // sum of per-place keyword set sizes
  std::uint32_t maxPlacesPerTrajectory = 0;
  double segmentLengthSum = 0.0;  // over consecutive place pairs
  std::uint64_t segmentCount = 0;
  std::uint64_t splitCount = 0;  // leaf splits performed by inserts

  bool operator==(const IndexStats&) const = default;
};

struct BuildOptions {
  std::uint32_t segmentLimit = 800;  // max places per leaf before a split
  std::uint32_t maxLevel = 12;
  WordPolicy policy = WordPolicy::kNeighborUnion;
  std::optional<BoundingBox> bounds;  // defaults to the data bounding box
};

class BckIndex {
 public:
  // Trajectory ids must be dense and sequential (0..n-1, in order); external
  // ids default to the decimal form of the dense id.
  static BckIndex build(std::span<const Trajectory> trajectories,
                        Vocabulary vocab = {},
                        std::vector<std::string> externalIds = {},
                        const BuildOptions& options = {});

  struct CellPostings {
    CellCode cell;
    std::span<const TrajId> trajIds;
  };
  struct IntervalScanResult {
    std::vector<CellPostings> cells;
    std::optional<ZInterval> shrunk;  // [first, last] found cell, if any
  };

  // All cells in [interval.sid, interval.eid] holding a posting for `word`,
  // by one seek plus a forward scan. Unknown words yield an empty result.
  IntervalScanResult getCellsInInterval(WordId word, ZInterval interval) const;

  // Component 2 lists for the requested words, parallel to `words` (empty
  // span when the trajectory lacks a word). Throws std::out_of_range for an
  // unknown trajectory.
  std::vector<std::span<const PlaceIndex>> placePostings(
      TrajId traj, std::span<const WordId> words) const;

  // Appendix-style incremental insert: id must equal trajectoryCount; leaf
  // overflows split the cell and re-associate every trajectory through it.
  // Requires exclusive access.
  void insertTrajectory(const Trajectory& traj, std::string externalId = "");

  const Grid& grid() const { return grid_; }
  const Vocabulary& vocab() const { return vocab_; }
  Vocabulary& vocabMutable() { return vocab_; }
  const IndexStats& stats() const { return stats_; }
  WordPolicy policy() const { return policy_; }
  double spaceArea() const { return grid_.side() * grid_.side(); }

  std::uint32_t trajectoryCount() const { return stats_.trajectoryCount; }
  std::span<const Point> trajectoryPoints(TrajId traj) const;
  const std::string& externalId(TrajId traj) const;

  const Component1& component1() const { return c1_; }
  const Component2& component2() const { return c2_; }

  bool operator==(const BckIndex& other) const;

  // Snapshot round-trip; see snapshot.cpp for the format.
  void save(const std::string& path) const;
  static BckIndex load(const std::string& path);

 private:
  friend struct SnapshotAccess;

  // (word, cell-code) pairs the trajectory currently posts under; shared by
  // insertion and the split-time re-association.
  std::vector<std::pair<WordId, CellCode>> deriveC1Entries(TrajId traj) const;
  std::vector<std::vector<WordId>> perPlaceWords(TrajId traj) const;
  void addC1(TrajId traj);
  void removeC1(TrajId traj);
  void rebuildLeafOccupancy();
  void splitOverloadedLeaves();

  Grid grid_;
  Vocabulary vocab_;
  Component1 c1_;
  Component2 c2_;
  IndexStats stats_;
  WordPolicy policy_ = WordPolicy::kNeighborUnion;
  std::vector<std::vector<Point>> geometry_;  // per-trajectory place points
  std::vector<std::string> externalIds_;
  // Per-leaf sorted list of trajectories with at least one place inside;
  // drives split-time re-indexing. Rebuilt on load, not serialized.
  std::vector<std::vector<TrajId>> leafTrajs_;
};

// Rebuilds the corpus behind an index: stored geometry plus per-place raw
// word sets recovered from Component 2. Inverse of build up to keyword
// normalization (places hold sorted, deduplicated word sets already).
std::vector<Trajectory> materializeTrajectories(const BckIndex& index);

}  // namespace tksk

#endif  // TKSK_BCK_INDEX_HPP
