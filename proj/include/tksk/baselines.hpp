#ifndef TKSK_BASELINES_HPP
#define TKSK_BASELINES_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "tksk/grid.hpp"
#include "tksk/model.hpp"

namespace tksk {

// Every routine here takes the corpus as a span ordered by dense trajectory
// id (corpus[i].id() == i), the same convention the index build enforces.

struct BaselineCounters {
  std::uint64_t nodesVisited = 0;  // tree nodes expanded
  std::uint64_t candidates = 0;    // trajectories reaching the scoring stage
  std::uint64_t matchCalls = 0;    // kernel invocations
};

// Reference scorer: scans every trajectory, prechecks keyword-union
// coverage, and scores survivors through the shared kernel with a running
// threshold. Exactly the answer an exhaustive scan would produce.
TopKAnswer bruteForceTopK(const Query& q, std::span<const Trajectory> corpus,
                          BaselineCounters* counters = nullptr);

// Trajectory-level inverted file: word -> ascending ids of the trajectories
// whose keyword union contains it.
class InvertedFile {
 public:
  static InvertedFile build(std::span<const Trajectory> corpus);

  // nullptr when no trajectory carries the word.
  const std::vector<TrajId>* postings(WordId w) const;
  std::size_t vocabSize() const { return lists_.size(); }

 private:
  std::vector<std::vector<TrajId>> lists_;
};

// Intersects the posting lists of the query words (smallest first), then
// scores every survivor.
TopKAnswer ifTopK(const Query& q, const InvertedFile& index,
                  std::span<const Trajectory> corpus,
                  BaselineCounters* counters = nullptr);

struct TrajectoryMBR {
  TrajId trajId = 0;
  BoundingBox box;

  friend bool operator==(const TrajectoryMBR&, const TrajectoryMBR&) =
      default;
};

// Bounding rectangle over all places of the trajectory.
TrajectoryMBR trajectoryMBR(const Trajectory& traj);

// Static R-tree bulk-loaded with sort-tile-recursive packing. Nodes are
// stored bottom-up: children always precede their parent, and the root is
// the last node.
class RTree {
 public:
  struct Node {
    BoundingBox box;
    bool leaf = true;
    std::vector<std::uint32_t> childNodes;  // internal nodes only
    std::vector<TrajectoryMBR> entries;     // leaf nodes only
  };

  // Throws std::invalid_argument when fanout < 2. An empty input yields an
  // empty tree (no nodes).
  static RTree build(std::span<const TrajectoryMBR> mbrs,
                     std::uint32_t fanout = 32);

  bool empty() const { return nodes_.empty(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::uint32_t rootIndex() const { return root_; }
  std::uint32_t fanout() const { return fanout_; }

 private:
  std::vector<Node> nodes_;
  std::uint32_t root_ = 0;
  std::uint32_t fanout_ = 2;
};

// Best-first search over rectangle lower bounds; popped trajectories are
// keyword-checked, then scored with a running threshold. Purely spatial
// pruning: the tree knows nothing about keywords.
TopKAnswer rtTopK(const Query& q, const RTree& tree,
                  std::span<const Trajectory> corpus,
                  BaselineCounters* counters = nullptr);

// R-tree whose every node carries a pseudo document: the union of all word
// sets below it. Built over the corpus directly so leaf entries know their
// trajectory's keyword union.
class IRTree {
 public:
  static IRTree build(std::span<const Trajectory> corpus,
                      std::uint32_t fanout = 32);

  const RTree& tree() const { return tree_; }
  // Parallel to tree().nodes().
  const std::vector<std::vector<WordId>>& pseudoDocs() const {
    return pseudoDocs_;
  }
  // Keyword union per trajectory, indexed by dense id.
  const std::vector<std::vector<WordId>>& trajectoryWords() const {
    return trajWords_;
  }

 private:
  RTree tree_;
  std::vector<std::vector<WordId>> pseudoDocs_;
  std::vector<std::vector<WordId>> trajWords_;
};

// Best-first search that prunes subtrees whose pseudo document misses a
// query word as well as those whose rectangle is already too far.
TopKAnswer irtTopK(const Query& q, const IRTree& index,
                   std::span<const Trajectory> corpus,
                   BaselineCounters* counters = nullptr);

}  // namespace tksk

#endif  // TKSK_BASELINES_HPP
