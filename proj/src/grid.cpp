#include "tksk/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tksk {

namespace {

// Spread the low 32 bits of v so bit i lands on bit 2i.
std::uint64_t spreadBits(std::uint64_t v) {
  v &= 0xffffffffull;
  v = (v | (v << 16)) & 0x0000ffff0000ffffull;
  v = (v | (v << 8)) & 0x00ff00ff00ff00ffull;
  v = (v | (v << 4)) & 0x0f0f0f0f0f0f0f0full;
  v = (v | (v << 2)) & 0x3333333333333333ull;
  v = (v | (v << 1)) & 0x5555555555555555ull;
  return v;
}

std::uint32_t compactBits(std::uint64_t v) {
  v &= 0x5555555555555555ull;
  v = (v | (v >> 1)) & 0x3333333333333333ull;
  v = (v | (v >> 2)) & 0x0f0f0f0f0f0f0f0full;
  v = (v | (v >> 4)) & 0x00ff00ff00ff00ffull;
  v = (v | (v >> 8)) & 0x0000ffff0000ffffull;
  v = (v | (v >> 16)) & 0x00000000ffffffffull;
  return static_cast<std::uint32_t>(v);
}

}  // namespace

CellCode interleave(std::uint32_t cx, std::uint32_t cy,
                    std::uint32_t maxLevel) {
  if (maxLevel > 24) {
    throw std::invalid_argument("maxLevel above 24 is unsupported");
  }
  const std::uint32_t side = 1u << maxLevel;
  if (cx >= side || cy >= side) {
    throw std::out_of_range("cell coordinate outside the grid");
  }
  return spreadBits(cx) | (spreadBits(cy) << 1);
}

std::pair<std::uint32_t, std::uint32_t> deinterleave(CellCode code) {
  return {compactBits(code), compactBits(code >> 1)};
}

Grid Grid::build(std::span<const Trajectory> trajectories,
                 std::uint32_t segmentLimit, std::uint32_t maxLevel,
                 std::optional<BoundingBox> forcedBounds) {
  if (segmentLimit < 1) {
    throw std::invalid_argument("segmentLimit must be at least 1");
  }
  if (maxLevel > 24) {
    throw std::invalid_argument("maxLevel above 24 is unsupported");
  }

  Grid g;
  g.maxLevel_ = maxLevel;
  g.segmentLimit_ = segmentLimit;

  if (forcedBounds.has_value()) {
    g.bounds_ = *forcedBounds;
    if (g.bounds_.width() <= 0 || g.bounds_.height() <= 0) {
      throw std::invalid_argument("bounds must have positive extent");
    }
    // The partition is a quadtree over a square; widen the shorter axis.
    const double side = std::max(g.bounds_.width(), g.bounds_.height());
    g.bounds_.maxX = g.bounds_.minX + side;
    g.bounds_.maxY = g.bounds_.minY + side;
  } else {
    bool any = false;
    BoundingBox b{0, 0, 0, 0};
    for (const Trajectory& t : trajectories) {
      for (const Place& p : t.places()) {
        if (!any) {
          b = BoundingBox{p.x(), p.y(), p.x(), p.y()};
          any = true;
        } else {
          b.minX = std::min(b.minX, p.x());
          b.minY = std::min(b.minY, p.y());
          b.maxX = std::max(b.maxX, p.x());
          b.maxY = std::max(b.maxY, p.y());
        }
      }
    }
    double side = std::max(b.width(), b.height());
    if (side <= 0.0) side = 1.0;  // degenerate data still gets a real square
    // Rounding in (max - min) can lose an ulp; grow the side until the
    // square provably contains every data point.
    while (b.minX + side < b.maxX || b.minY + side < b.maxY) {
      side = std::nextafter(side, std::numeric_limits<double>::infinity());
    }
    g.bounds_ = BoundingBox{b.minX, b.minY, b.minX + side, b.minY + side};
  }

  std::vector<CellCode> codes;
  for (const Trajectory& t : trajectories) {
    for (const Place& p : t.places()) {
      codes.push_back(g.baseCode(p.location()));
    }
  }
  std::sort(codes.begin(), codes.end());

  // Top-down: a node splits while its place count exceeds the limit and the
  // depth allows it. Recursion over sorted codes keeps counting O(log).
  struct Frame {
    CellCode lo;
    std::uint32_t level;
  };
  std::vector<Frame> stack{{0, 0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    const CellCode span = g.spanAtLevel(f.level);
    const auto first =
        std::lower_bound(codes.begin(), codes.end(), f.lo);
    const auto last =
        std::lower_bound(codes.begin(), codes.end(), f.lo + span);
    const auto count = static_cast<std::uint32_t>(last - first);
    if (count > segmentLimit && f.level < maxLevel) {
      const CellCode quarter = span / 4;
      // Push in reverse so children pop in ascending code order.
      for (int c = 3; c >= 0; --c) {
        stack.push_back({f.lo + quarter * static_cast<CellCode>(c),
                         f.level + 1});
      }
    } else {
      g.leaves_.push_back(Leaf{f.lo, f.level, count});
      g.deepestLevel_ = std::max(g.deepestLevel_, f.level);
    }
  }
  return g;
}

Grid Grid::restore(const BoundingBox& bounds, std::uint32_t maxLevel,
                   std::uint32_t segmentLimit, std::vector<Leaf> leaves) {
  if (maxLevel > 24 || segmentLimit < 1 || bounds.width() <= 0 ||
      bounds.height() <= 0) {
    throw std::invalid_argument("invalid grid parameters");
  }
  Grid g;
  g.bounds_ = bounds;
  g.maxLevel_ = maxLevel;
  g.segmentLimit_ = segmentLimit;
  g.leaves_ = std::move(leaves);
  CellCode next = 0;
  for (const Leaf& l : g.leaves_) {
    const CellCode span =
        l.level <= maxLevel ? g.spanAtLevel(l.level) : CellCode{1};
    if (l.level > maxLevel || l.code != next || (l.code & (span - 1)) != 0) {
      throw std::invalid_argument("grid leaves do not tile the code space");
    }
    next = l.code + span;
    g.deepestLevel_ = std::max(g.deepestLevel_, l.level);
  }
  if (next != g.spanAtLevel(0)) {
    throw std::invalid_argument("grid leaves do not tile the code space");
  }
  return g;
}

double Grid::smallestLeafSide() const {
  return side() / static_cast<double>(1u << deepestLevel_);
}

std::pair<std::uint32_t, std::uint32_t> Grid::baseCell(const Point& p) const {
  if (!bounds_.contains(p)) {
    throw std::out_of_range("place outside grid bounds");
  }
  const double n = static_cast<double>(1u << maxLevel_);
  const auto clampCell = [&](double v) {
    const double c = std::floor(v);
    if (c < 0.0) return 0u;
    if (c >= n) return static_cast<std::uint32_t>(n) - 1;  // max edge closed
    return static_cast<std::uint32_t>(c);
  };
  return {clampCell((p.x - bounds_.minX) / side() * n),
          clampCell((p.y - bounds_.minY) / side() * n)};
}

CellCode Grid::baseCode(const Point& p) const {
  const auto [cx, cy] = baseCell(p);
  return interleave(cx, cy, maxLevel_);
}

std::size_t Grid::leafIndexAt(CellCode baseCode) const {
  // Last leaf whose start code is <= baseCode; leaves tile the code space.
  auto it = std::upper_bound(
      leaves_.begin(), leaves_.end(), baseCode,
      [](CellCode c, const Leaf& l) { return c < l.code; });
  if (it == leaves_.begin()) {
    throw std::out_of_range("base code before the first leaf");
  }
  return static_cast<std::size_t>(std::prev(it) - leaves_.begin());
}

std::size_t Grid::leafIndexAt(const Point& p) const {
  return leafIndexAt(baseCode(p));
}

CellId Grid::leafCell(std::size_t leafIndex) const {
  const Leaf& l = leaves_.at(leafIndex);
  return CellId{l.code, l.level};
}

CellCode Grid::spanAtLevel(std::uint32_t level) const {
  return CellCode{1} << (2 * (maxLevel_ - level));
}

BoundingBox Grid::cellRect(const CellId& cell) const {
  const auto [cx, cy] = deinterleave(cell.code);
  const double cellsPerSide = static_cast<double>(1u << cell.level);
  const std::uint32_t shift = maxLevel_ - cell.level;
  const double w = side() / cellsPerSide;
  const double x0 = bounds_.minX + (cx >> shift) * w;
  const double y0 = bounds_.minY + (cy >> shift) * w;
  return BoundingBox{x0, y0, x0 + w, y0 + w};
}

double minDistToBox(const Point& p, const BoundingBox& box) {
  const double dx = std::max({box.minX - p.x, 0.0, p.x - box.maxX});
  const double dy = std::max({box.minY - p.y, 0.0, p.y - box.maxY});
  return std::sqrt(dx * dx + dy * dy);
}

double Grid::minDistToCell(const Point& p, const CellId& cell) const {
  return minDistToBox(p, cellRect(cell));
}

void Grid::collectIntervals(CellCode code, std::uint32_t level,
                            const BoundingBox& window,
                            std::vector<ZInterval>& out) const {
  const BoundingBox rect = cellRect(CellId{code, level});
  if (!rect.intersects(window)) return;
  const CellCode span = spanAtLevel(level);

  // A node is a leaf exactly when a leaf record starts at its code with its
  // level; otherwise the node is subdivided (descent never reaches codes
  // interior to a leaf).
  const std::size_t li = leafIndexAt(code);
  const Leaf& l = leaves_[li];
  const bool isLeaf = (l.code == code && l.level == level);

  const bool enclosed = rect.minX >= window.minX && rect.maxX <= window.maxX &&
                        rect.minY >= window.minY && rect.maxY <= window.maxY;
  if (isLeaf || enclosed) {
    // Either one intersecting leaf, or a subtree whose every leaf intersects.
    if (!out.empty() && out.back().eid + 1 == code) {
      out.back().eid = code + span - 1;
    } else {
      out.push_back(ZInterval{code, code + span - 1});
    }
    return;
  }
  const CellCode quarter = span / 4;
  for (std::uint32_t c = 0; c < 4; ++c) {
    collectIntervals(code + quarter * c, level + 1, window, out);
  }
}

std::vector<ZInterval> Grid::windowToIntervals(
    const BoundingBox& window) const {
  std::vector<ZInterval> out;
  collectIntervals(0, 0, window, out);
  return out;
}

std::size_t Grid::splitLeaf(std::size_t leafIndex) {
  const Leaf old = leaves_.at(leafIndex);
  if (old.level >= maxLevel_) {
    throw std::logic_error("cannot split a leaf at maxLevel");
  }
  const CellCode quarter = spanAtLevel(old.level) / 4;
  std::vector<Leaf> children;
  children.reserve(4);
  for (std::uint32_t c = 0; c < 4; ++c) {
    children.push_back(Leaf{old.code + quarter * c, old.level + 1, 0});
  }
  leaves_.erase(leaves_.begin() + static_cast<std::ptrdiff_t>(leafIndex));
  leaves_.insert(leaves_.begin() + static_cast<std::ptrdiff_t>(leafIndex),
                 children.begin(), children.end());
  deepestLevel_ = std::max(deepestLevel_, old.level + 1);
  return leafIndex;
}

void Grid::setLeafLoad(std::size_t leafIndex, std::uint32_t load) {
  leaves_.at(leafIndex).load = load;
}

std::vector<Fragment> fragmentPoints(TrajId trajId,
                                     std::span<const Point> points,
                                     const Grid& grid) {
  std::vector<Fragment> out;
  std::uint32_t ordinal = 0;
  std::size_t currentLeaf = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const std::size_t li = grid.leafIndexAt(points[i]);
    const auto idx = static_cast<PlaceIndex>(i + 1);
    if (out.empty() || li != currentLeaf) {
      ++ordinal;
      out.push_back(Fragment{trajId, grid.leafCell(li), idx, idx, ordinal});
      currentLeaf = li;
    } else {
      out.back().last = idx;
    }
  }
  return out;
}

std::vector<Fragment> fragmentTrajectory(const Trajectory& traj,
                                         const Grid& grid) {
  std::vector<Point> points;
  points.reserve(traj.size());
  for (const Place& p : traj.places()) points.push_back(p.location());
  return fragmentPoints(traj.id(), points, grid);
}

}  // namespace tksk
