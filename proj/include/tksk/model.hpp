#ifndef TKSK_MODEL_HPP
#define TKSK_MODEL_HPP

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace tksk {

using WordId = std::uint32_t;
using TrajId = std::uint32_t;
// Place positions within a trajectory are 1-based in all public interfaces.
using PlaceIndex = std::uint32_t;

inline constexpr double kNoMatch = std::numeric_limits<double>::infinity();

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

double dist(const Point& a, const Point& b);

// A visited location: coordinates plus a sorted, duplicate-free keyword set.
class Place {
 public:
  Place(Point location, std::vector<WordId> keywords);

  const Point& location() const { return location_; }
  double x() const { return location_.x; }
  double y() const { return location_.y; }
  const std::vector<WordId>& keywords() const { return keywords_; }
  bool hasKeyword(WordId w) const;

 private:
  Point location_;
  std::vector<WordId> keywords_;
};

class Trajectory {
 public:
  Trajectory(TrajId id, std::vector<Place> places);

  TrajId id() const { return id_; }
  std::size_t size() const { return places_.size(); }
  // i is 1-based; throws std::out_of_range outside [1, size()].
  const Place& place(PlaceIndex i) const;
  const std::vector<Place>& places() const { return places_; }
  std::vector<WordId> keywordUnion() const;

 private:
  TrajId id_;
  std::vector<Place> places_;
};

struct Query {
  Point location;
  std::vector<WordId> keywords;  // sorted, duplicate-free, non-empty
  std::uint32_t k = 1;
};

// Validates and normalizes: sorts/dedupes keywords, requires a non-empty
// keyword set, k >= 1, and finite coordinates. Throws std::invalid_argument.
Query makeQuery(Point location, std::vector<WordId> keywords, std::uint32_t k);

struct MatchResult {
  TrajId trajId = 0;
  PlaceIndex s = 0;  // 0 when there is no witness window
  PlaceIndex e = 0;
  double distance = kNoMatch;

  bool matched() const { return distance < kNoMatch; }
};

// Results sorted ascending by (distance, trajId); at most one per trajectory.
struct TopKAnswer {
  std::vector<MatchResult> results;
};

// True when the keywords of places s..e jointly cover all query keywords.
// s, e are 1-based with s <= e; throws std::out_of_range on bad indices and
// std::invalid_argument on an empty keyword set.
bool subMatches(const Trajectory& traj, PlaceIndex s, PlaceIndex e,
                const std::vector<WordId>& queryKeywords);

// min(dist(q, L_s), dist(q, L_e)) plus the path length from L_s to L_e when
// the window covers the query keywords; +infinity otherwise.
double matchDist(const Query& q, const Trajectory& traj, PlaceIndex s,
                 PlaceIndex e);

// The distance expression above without the coverage test. Every component
// that reports a window distance funnels through this one routine so that
// results are bit-identical across algorithms: the segment lengths are
// accumulated left to right. Indices are 0-based here.
double windowDistance(const Point& q, std::span<const Point> places,
                      std::size_t s0, std::size_t e0);

}  // namespace tksk

#endif  // TKSK_MODEL_HPP
