#include "tksk/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <tuple>

#include "tksk/match.hpp"
#include "tksk/topk.hpp"

namespace tksk {

namespace {

bool coversQuery(const std::vector<WordId>& sortedWords,
                 const std::vector<WordId>& queryWords) {
  return std::includes(sortedWords.begin(), sortedWords.end(),
                       queryWords.begin(), queryWords.end());
}

BoundingBox boxUnion(const BoundingBox& a, const BoundingBox& b) {
  return BoundingBox{std::min(a.minX, b.minX), std::min(a.minY, b.minY),
                     std::max(a.maxX, b.maxX), std::max(a.maxY, b.maxY)};
}

std::vector<WordId> sortedWordUnion(const std::vector<WordId>& a,
                                    const std::vector<WordId>& b) {
  std::vector<WordId> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

// Sort-tile-recursive grouping: items ordered by x-center into vertical
// slabs, by y-center within each slab, then packed fanout at a time. Ties
// break on the caller-provided ids so builds are deterministic.
std::vector<std::vector<std::size_t>> strGroups(
    const std::vector<Point>& centers, const std::vector<std::uint32_t>& ids,
    std::uint32_t fanout) {
  const std::size_t n = centers.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::pair(centers[a].x, ids[a]) < std::pair(centers[b].x, ids[b]);
  });

  const std::size_t pages = (n + fanout - 1) / fanout;
  const std::size_t slabs = static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(pages))));
  const std::size_t slabItems = (n + slabs - 1) / slabs;

  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t s = 0; s < n; s += slabItems) {
    const std::size_t end = std::min(s + slabItems, n);
    std::sort(order.begin() + s, order.begin() + end,
              [&](std::size_t a, std::size_t b) {
                return std::pair(centers[a].y, ids[a]) <
                       std::pair(centers[b].y, ids[b]);
              });
    for (std::size_t g = s; g < end; g += fanout) {
      groups.emplace_back(order.begin() + g,
                          order.begin() + std::min(g + fanout, end));
    }
  }
  return groups;
}

Point boxCenter(const BoundingBox& b) {
  return Point{(b.minX + b.maxX) / 2.0, (b.minY + b.maxY) / 2.0};
}

// Queue entries for the best-first traversals. Trajectories sort before
// nodes at equal keys, then by index, so pops are deterministic.
struct QueueEntry {
  double key = 0.0;
  bool isNode = false;
  std::uint32_t index = 0;  // node index or trajectory id
};

struct PopsLater {
  bool operator()(const QueueEntry& a, const QueueEntry& b) const {
    return std::tuple(a.key, a.isNode, a.index) >
           std::tuple(b.key, b.isNode, b.index);
  }
};

using BestFirstQueue =
    std::priority_queue<QueueEntry, std::vector<QueueEntry>, PopsLater>;

// A popped key strictly above the worst admitted distance ends the search:
// rectangle lower bounds only grow from here on. Equal keys keep going so a
// tied trajectory with a smaller id can still displace the current worst.
bool searchDone(const TopKCollector& results, double key) {
  return results.full() && key > results.worst().distance;
}

}  // namespace

TopKAnswer bruteForceTopK(const Query& q, std::span<const Trajectory> corpus,
                          BaselineCounters* counters) {
  TopKCollector results(q.k);
  for (const Trajectory& t : corpus) {
    if (!coversQuery(t.keywordUnion(), q.keywords)) continue;
    if (counters != nullptr) {
      ++counters->candidates;
      ++counters->matchCalls;
    }
    results.offer(matchMinDist(q, t, results.threshold()));
  }
  return results.drain();
}

InvertedFile InvertedFile::build(std::span<const Trajectory> corpus) {
  InvertedFile file;
  for (const Trajectory& t : corpus) {
    for (WordId w : t.keywordUnion()) {
      if (w >= file.lists_.size()) file.lists_.resize(w + 1);
      file.lists_[w].push_back(t.id());
    }
  }
  return file;
}

const std::vector<TrajId>* InvertedFile::postings(WordId w) const {
  if (w >= lists_.size() || lists_[w].empty()) return nullptr;
  return &lists_[w];
}

TopKAnswer ifTopK(const Query& q, const InvertedFile& index,
                  std::span<const Trajectory> corpus,
                  BaselineCounters* counters) {
  std::vector<const std::vector<TrajId>*> lists;
  for (WordId w : q.keywords) {
    const auto* p = index.postings(w);
    if (p == nullptr) return {};
    lists.push_back(p);
  }
  std::sort(lists.begin(), lists.end(),
            [](const auto* a, const auto* b) { return a->size() < b->size(); });

  std::vector<TrajId> survivors = *lists.front();
  for (std::size_t i = 1; i < lists.size() && !survivors.empty(); ++i) {
    std::vector<TrajId> next;
    std::set_intersection(survivors.begin(), survivors.end(),
                          lists[i]->begin(), lists[i]->end(),
                          std::back_inserter(next));
    survivors = std::move(next);
  }

  TopKCollector results(q.k);
  for (TrajId t : survivors) {
    if (counters != nullptr) {
      ++counters->candidates;
      ++counters->matchCalls;
    }
    results.offer(matchMinDist(q, corpus[t], results.threshold()));
  }
  return results.drain();
}

TrajectoryMBR trajectoryMBR(const Trajectory& traj) {
  const Point& first = traj.places().front().location();
  BoundingBox box{first.x, first.y, first.x, first.y};
  for (const Place& place : traj.places()) {
    const Point& p = place.location();
    box.minX = std::min(box.minX, p.x);
    box.minY = std::min(box.minY, p.y);
    box.maxX = std::max(box.maxX, p.x);
    box.maxY = std::max(box.maxY, p.y);
  }
  return TrajectoryMBR{traj.id(), box};
}

RTree RTree::build(std::span<const TrajectoryMBR> mbrs,
                   std::uint32_t fanout) {
  if (fanout < 2) throw std::invalid_argument("fanout must be at least 2");
  RTree tree;
  tree.fanout_ = fanout;
  if (mbrs.empty()) return tree;

  // Leaf level.
  std::vector<Point> centers;
  std::vector<std::uint32_t> ids;
  for (const TrajectoryMBR& m : mbrs) {
    centers.push_back(boxCenter(m.box));
    ids.push_back(m.trajId);
  }
  std::vector<std::uint32_t> level;
  for (const auto& group : strGroups(centers, ids, fanout)) {
    Node node;
    node.leaf = true;
    node.box = mbrs[group.front()].box;
    for (std::size_t i : group) {
      node.entries.push_back(mbrs[i]);
      node.box = boxUnion(node.box, mbrs[i].box);
    }
    level.push_back(static_cast<std::uint32_t>(tree.nodes_.size()));
    tree.nodes_.push_back(std::move(node));
  }

  // Upper levels, until a single root remains.
  while (level.size() > 1) {
    centers.clear();
    ids.clear();
    for (std::uint32_t ni : level) {
      centers.push_back(boxCenter(tree.nodes_[ni].box));
      ids.push_back(ni);
    }
    std::vector<std::uint32_t> next;
    for (const auto& group : strGroups(centers, ids, fanout)) {
      Node node;
      node.leaf = false;
      node.box = tree.nodes_[level[group.front()]].box;
      for (std::size_t i : group) {
        node.childNodes.push_back(level[i]);
        node.box = boxUnion(node.box, tree.nodes_[level[i]].box);
      }
      next.push_back(static_cast<std::uint32_t>(tree.nodes_.size()));
      tree.nodes_.push_back(std::move(node));
    }
    level = std::move(next);
  }
  tree.root_ = level.front();
  return tree;
}

TopKAnswer rtTopK(const Query& q, const RTree& tree,
                  std::span<const Trajectory> corpus,
                  BaselineCounters* counters) {
  TopKCollector results(q.k);
  if (!tree.empty()) {
    BestFirstQueue queue;
    queue.push(QueueEntry{
        minDistToBox(q.location, tree.nodes()[tree.rootIndex()].box), true,
        tree.rootIndex()});
    while (!queue.empty()) {
      const QueueEntry e = queue.top();
      queue.pop();
      if (searchDone(results, e.key)) break;
      if (!e.isNode) {
        if (counters != nullptr) ++counters->candidates;
        const Trajectory& t = corpus[e.index];
        if (coversQuery(t.keywordUnion(), q.keywords)) {
          if (counters != nullptr) ++counters->matchCalls;
          results.offer(matchMinDist(q, t, results.threshold()));
        }
        continue;
      }
      if (counters != nullptr) ++counters->nodesVisited;
      const RTree::Node& node = tree.nodes()[e.index];
      if (node.leaf) {
        for (const TrajectoryMBR& entry : node.entries) {
          queue.push(QueueEntry{minDistToBox(q.location, entry.box), false,
                                entry.trajId});
        }
      } else {
        for (std::uint32_t child : node.childNodes) {
          queue.push(QueueEntry{
              minDistToBox(q.location, tree.nodes()[child].box), true,
              child});
        }
      }
    }
  }
  return results.drain();
}

IRTree IRTree::build(std::span<const Trajectory> corpus,
                     std::uint32_t fanout) {
  IRTree index;
  std::vector<TrajectoryMBR> mbrs;
  index.trajWords_.resize(corpus.size());
  for (const Trajectory& t : corpus) {
    mbrs.push_back(trajectoryMBR(t));
    index.trajWords_[t.id()] = t.keywordUnion();
  }
  index.tree_ = RTree::build(mbrs, fanout);

  // Children precede parents in node order, so one forward pass suffices.
  const auto& nodes = index.tree_.nodes();
  index.pseudoDocs_.resize(nodes.size());
  for (std::size_t ni = 0; ni < nodes.size(); ++ni) {
    std::vector<WordId> doc;
    if (nodes[ni].leaf) {
      for (const TrajectoryMBR& entry : nodes[ni].entries) {
        doc = sortedWordUnion(doc, index.trajWords_[entry.trajId]);
      }
    } else {
      for (std::uint32_t child : nodes[ni].childNodes) {
        doc = sortedWordUnion(doc, index.pseudoDocs_[child]);
      }
    }
    index.pseudoDocs_[ni] = std::move(doc);
  }
  return index;
}

TopKAnswer irtTopK(const Query& q, const IRTree& index,
                   std::span<const Trajectory> corpus,
                   BaselineCounters* counters) {
  TopKCollector results(q.k);
  const RTree& tree = index.tree();
  if (!tree.empty()) {
    BestFirstQueue queue;
    queue.push(QueueEntry{
        minDistToBox(q.location, tree.nodes()[tree.rootIndex()].box), true,
        tree.rootIndex()});
    while (!queue.empty()) {
      const QueueEntry e = queue.top();
      queue.pop();
      if (searchDone(results, e.key)) break;
      if (!e.isNode) {
        // Keyword coverage was established at enqueue time.
        if (counters != nullptr) {
          ++counters->candidates;
          ++counters->matchCalls;
        }
        results.offer(matchMinDist(q, corpus[e.index], results.threshold()));
        continue;
      }
      if (counters != nullptr) ++counters->nodesVisited;
      const RTree::Node& node = tree.nodes()[e.index];
      const auto admit = [&](double key) {
        return !results.full() || key <= results.worst().distance;
      };
      if (node.leaf) {
        for (const TrajectoryMBR& entry : node.entries) {
          if (!coversQuery(index.trajectoryWords()[entry.trajId],
                           q.keywords)) {
            continue;
          }
          const double key = minDistToBox(q.location, entry.box);
          if (admit(key)) {
            queue.push(QueueEntry{key, false, entry.trajId});
          }
        }
      } else {
        for (std::uint32_t child : node.childNodes) {
          if (!coversQuery(index.pseudoDocs()[child], q.keywords)) continue;
          const double key = minDistToBox(q.location, tree.nodes()[child].box);
          if (admit(key)) {
            queue.push(QueueEntry{key, true, child});
          }
        }
      }
    }
  }
  return results.drain();
}

}  // namespace tksk
