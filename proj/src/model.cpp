#include "tksk/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tksk {

double dist(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

Place::Place(Point location, std::vector<WordId> keywords)
    : location_(location), keywords_(std::move(keywords)) {
  if (!std::isfinite(location_.x) || !std::isfinite(location_.y)) {
    throw std::invalid_argument("place coordinates must be finite");
  }
  std::sort(keywords_.begin(), keywords_.end());
  keywords_.erase(std::unique(keywords_.begin(), keywords_.end()),
                  keywords_.end());
}

bool Place::hasKeyword(WordId w) const {
  return std::binary_search(keywords_.begin(), keywords_.end(), w);
}

Trajectory::Trajectory(TrajId id, std::vector<Place> places)
    : id_(id), places_(std::move(places)) {
  if (places_.empty()) {
    throw std::invalid_argument("trajectory must contain at least one place");
  }
}

const Place& Trajectory::place(PlaceIndex i) const {
  if (i < 1 || i > places_.size()) {
    throw std::out_of_range("place index out of range");
  }
  return places_[i - 1];
}

std::vector<WordId> Trajectory::keywordUnion() const {
  std::vector<WordId> out;
  for (const Place& p : places_) {
    out.insert(out.end(), p.keywords().begin(), p.keywords().end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Query makeQuery(Point location, std::vector<WordId> keywords,
                std::uint32_t k) {
  if (!std::isfinite(location.x) || !std::isfinite(location.y)) {
    throw std::invalid_argument("query coordinates must be finite");
  }
  if (keywords.empty()) {
    throw std::invalid_argument("query keyword set must be non-empty");
  }
  if (k < 1) {
    throw std::invalid_argument("query k must be at least 1");
  }
  std::sort(keywords.begin(), keywords.end());
  keywords.erase(std::unique(keywords.begin(), keywords.end()),
                 keywords.end());
  return Query{location, std::move(keywords), k};
}

bool subMatches(const Trajectory& traj, PlaceIndex s, PlaceIndex e,
                const std::vector<WordId>& queryKeywords) {
  if (queryKeywords.empty()) {
    throw std::invalid_argument("query keyword set must be non-empty");
  }
  if (s < 1 || e > traj.size() || s > e) {
    throw std::out_of_range("window indices out of range");
  }
  std::size_t covered = 0;
  std::vector<bool> seen(queryKeywords.size(), false);
  for (PlaceIndex i = s; i <= e; ++i) {
    const Place& p = traj.place(i);
    for (std::size_t j = 0; j < queryKeywords.size(); ++j) {
      if (!seen[j] && p.hasKeyword(queryKeywords[j])) {
        seen[j] = true;
        if (++covered == queryKeywords.size()) return true;
      }
    }
  }
  return false;
}

double windowDistance(const Point& q, std::span<const Point> places,
                      std::size_t s0, std::size_t e0) {
  double path = 0.0;
  for (std::size_t i = s0; i < e0; ++i) {
    path += dist(places[i], places[i + 1]);
  }
  return std::min(dist(q, places[s0]), dist(q, places[e0])) + path;
}

double matchDist(const Query& q, const Trajectory& traj, PlaceIndex s,
                 PlaceIndex e) {
  if (!subMatches(traj, s, e, q.keywords)) return kNoMatch;
  std::vector<Point> pts;
  pts.reserve(traj.size());
  for (const Place& p : traj.places()) pts.push_back(p.location());
  return windowDistance(q.location, pts, s - 1, e - 1);
}

}  // namespace tksk
