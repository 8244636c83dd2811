#ifndef TKSK_GRID_HPP
#define TKSK_GRID_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tksk/model.hpp"

namespace tksk {

using CellCode = std::uint64_t;

// A quad cell: `code` is the minimum base-resolution Z-order code among the
// uniform cells it covers, so its low 2*(maxLevel - level) bits are zero and
// it spans base codes [code, code + 4^(maxLevel - level) - 1].
struct CellId {
  CellCode code = 0;
  std::uint32_t level = 0;

  friend bool operator==(const CellId&, const CellId&) = default;
};

struct ZInterval {
  CellCode sid = 0;
  CellCode eid = 0;  // inclusive

  friend bool operator==(const ZInterval&, const ZInterval&) = default;
};

struct BoundingBox {
  double minX = 0.0, minY = 0.0, maxX = 0.0, maxY = 0.0;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;

  double width() const { return maxX - minX; }
  double height() const { return maxY - minY; }
  bool contains(const Point& p) const {
    return p.x >= minX && p.x <= maxX && p.y >= minY && p.y <= maxY;
  }
  bool intersects(const BoundingBox& o) const {
    return minX <= o.maxX && o.minX <= maxX && minY <= o.maxY &&
           o.minY <= maxY;
  }
};

// Euclidean distance from a point to a rectangle; zero inside. Every
// spatial lower bound in the project funnels through this one expression.
double minDistToBox(const Point& p, const BoundingBox& box);

// Bit i of cx lands on bit 2i, bit i of cy on bit 2i+1. Throws
// std::out_of_range when a coordinate does not fit in maxLevel bits.
CellCode interleave(std::uint32_t cx, std::uint32_t cy,
                    std::uint32_t maxLevel);
std::pair<std::uint32_t, std::uint32_t> deinterleave(CellCode code);

struct Fragment {
  TrajId trajId = 0;
  CellId cell;
  PlaceIndex first = 0;  // 1-based, inclusive
  PlaceIndex last = 0;
  std::uint32_t ordinal = 0;  // 1-based position in the fragment sequence
};

// Adaptive quadtree over a square space: leaves tile the bounds; a leaf holds
// at most segmentLimit places unless it sits at maxLevel.
class Grid {
 public:
  struct Leaf {
    CellCode code = 0;
    std::uint32_t level = 0;
    std::uint32_t load = 0;  // places currently assigned to the leaf

    friend bool operator==(const Leaf&, const Leaf&) = default;
  };

  // Splits top-down by place counts. When `forcedBounds` is absent the
  // bounds are the data bounding box expanded to a square.
  static Grid build(std::span<const Trajectory> trajectories,
                    std::uint32_t segmentLimit, std::uint32_t maxLevel,
                    std::optional<BoundingBox> forcedBounds = std::nullopt);

  // Reassembles a grid from serialized parts, validating that the leaves
  // tile the code space in ascending order. Throws std::invalid_argument.
  static Grid restore(const BoundingBox& bounds, std::uint32_t maxLevel,
                      std::uint32_t segmentLimit, std::vector<Leaf> leaves);

  friend bool operator==(const Grid&, const Grid&) = default;

  const BoundingBox& bounds() const { return bounds_; }
  std::uint32_t maxLevel() const { return maxLevel_; }
  std::uint32_t segmentLimit() const { return segmentLimit_; }
  const std::vector<Leaf>& leaves() const { return leaves_; }
  double side() const { return bounds_.width(); }
  // Side length of the smallest leaf cell (the expansion step tau).
  double smallestLeafSide() const;
  std::uint32_t deepestLevel() const { return deepestLevel_; }

  // Base-resolution column/row of a point; half-open cells, the global max
  // edge closed. Throws std::out_of_range outside bounds.
  std::pair<std::uint32_t, std::uint32_t> baseCell(const Point& p) const;
  CellCode baseCode(const Point& p) const;

  // Index into leaves() of the leaf containing the given base code / point.
  std::size_t leafIndexAt(CellCode baseCode) const;
  std::size_t leafIndexAt(const Point& p) const;
  CellId leafCell(std::size_t leafIndex) const;

  BoundingBox cellRect(const CellId& cell) const;
  double minDistToCell(const Point& p, const CellId& cell) const;

  // Number of base codes covered by a cell at `level`.
  CellCode spanAtLevel(std::uint32_t level) const;

  // Disjoint ascending base-code intervals that exactly cover the ranges of
  // all leaves whose rectangle intersects the window.
  std::vector<ZInterval> windowToIntervals(const BoundingBox& window) const;

  // Replaces leaves_[leafIndex] with its four children (loads zeroed; the
  // caller redistributes). Returns the index of the first child. Exclusive
  // access required; only the index insert path uses this.
  std::size_t splitLeaf(std::size_t leafIndex);
  void setLeafLoad(std::size_t leafIndex, std::uint32_t load);

 private:
  BoundingBox bounds_;
  std::uint32_t maxLevel_ = 0;
  std::uint32_t segmentLimit_ = 1;
  std::uint32_t deepestLevel_ = 0;
  std::vector<Leaf> leaves_;  // sorted by code, tiling the bounds

  void collectIntervals(CellCode code, std::uint32_t level,
                        const BoundingBox& window,
                        std::vector<ZInterval>& out) const;
};

// Maximal runs of consecutive places sharing a leaf cell.
std::vector<Fragment> fragmentTrajectory(const Trajectory& traj,
                                         const Grid& grid);

// Fragmentation over bare coordinates (keywords play no role in it); used by
// callers that store geometry separately from keyword postings.
std::vector<Fragment> fragmentPoints(TrajId trajId,
                                     std::span<const Point> points,
                                     const Grid& grid);

}  // namespace tksk

#endif  // TKSK_GRID_HPP
