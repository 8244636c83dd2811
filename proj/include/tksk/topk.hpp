#ifndef TKSK_TOPK_HPP
#define TKSK_TOPK_HPP

#include <cstdint>
#include <queue>
#include <utility>
#include <vector>

#include "tksk/model.hpp"

namespace tksk {

// Collects match results into a bounded best-k set under the global
// (distance, trajId) ordering. The admission threshold is the current k-th
// distance, +infinity while underfull: any kernel result at or below the
// threshold it was computed with is exact, so admitted values are always
// true minimum match distances.
class TopKCollector {
 public:
  explicit TopKCollector(std::uint32_t k) : k_(k) {}

  bool full() const { return heap_.size() == k_; }
  double threshold() const {
    return full() ? heap_.top().distance : kNoMatch;
  }
  // The entry a new result must beat; meaningful only when not empty.
  const MatchResult& worst() const { return heap_.top(); }

  void offer(const MatchResult& r) {
    if (!r.matched()) return;
    if (heap_.size() < k_) {
      heap_.push(r);
    } else if (std::pair(r.distance, r.trajId) <
               std::pair(heap_.top().distance, heap_.top().trajId)) {
      heap_.pop();
      heap_.push(r);
    }
  }

  // Ascending (distance, trajId); the collector is left empty.
  TopKAnswer drain() {
    TopKAnswer answer;
    answer.results.resize(heap_.size());
    for (std::size_t i = heap_.size(); i-- > 0;) {
      answer.results[i] = heap_.top();
      heap_.pop();
    }
    return answer;
  }

 private:
  // Max-heap on (distance, trajId): the entry to evict sits on top.
  struct Worse {
    bool operator()(const MatchResult& a, const MatchResult& b) const {
      return std::pair(a.distance, a.trajId) <
             std::pair(b.distance, b.trajId);
    }
  };

  std::uint32_t k_;
  std::priority_queue<MatchResult, std::vector<MatchResult>, Worse> heap_;
};

}  // namespace tksk

#endif  // TKSK_TOPK_HPP
