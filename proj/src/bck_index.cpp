#include "tksk/bck_index.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace tksk {

namespace {

void putU32(std::uint8_t* out, std::uint32_t v) {
  out[0] = static_cast<std::uint8_t>(v >> 24);
  out[1] = static_cast<std::uint8_t>(v >> 16);
  out[2] = static_cast<std::uint8_t>(v >> 8);
  out[3] = static_cast<std::uint8_t>(v);
}

void putU64(std::uint8_t* out, std::uint64_t v) {
  putU32(out, static_cast<std::uint32_t>(v >> 32));
  putU32(out + 4, static_cast<std::uint32_t>(v));
}

std::uint32_t getU32(const std::uint8_t* in) {
  return (std::uint32_t{in[0]} << 24) | (std::uint32_t{in[1]} << 16) |
         (std::uint32_t{in[2]} << 8) | std::uint32_t{in[3]};
}

std::uint64_t getU64(const std::uint8_t* in) {
  return (std::uint64_t{getU32(in)} << 32) | getU32(in + 4);
}

std::vector<WordId> sortedUnion(const std::vector<std::vector<WordId>>& sets,
                                std::size_t first, std::size_t last) {
  std::vector<WordId> out;
  for (std::size_t i = first; i <= last; ++i) {
    out.insert(out.end(), sets[i].begin(), sets[i].end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void insertSorted(std::vector<TrajId>& list, TrajId id) {
  auto it = std::lower_bound(list.begin(), list.end(), id);
  if (it == list.end() || *it != id) list.insert(it, id);
}

void eraseSorted(std::vector<TrajId>& list, TrajId id) {
  auto it = std::lower_bound(list.begin(), list.end(), id);
  if (it != list.end() && *it == id) list.erase(it);
}

}  // namespace

C1Key c1Key(WordId word, CellCode cell) {
  C1Key k;
  putU32(k.data(), word);
  putU64(k.data() + 4, cell);
  return k;
}

C2Key c2Key(TrajId traj, WordId word) {
  C2Key k;
  putU32(k.data(), traj);
  putU32(k.data() + 4, word);
  return k;
}

std::pair<WordId, CellCode> decodeC1Key(const C1Key& k) {
  return {getU32(k.data()), getU64(k.data() + 4)};
}

std::pair<TrajId, WordId> decodeC2Key(const C2Key& k) {
  return {getU32(k.data()), getU32(k.data() + 4)};
}

// --------------------------------------------------------------------------
// Vocabulary
// --------------------------------------------------------------------------

WordId Vocabulary::intern(const std::string& word) {
  const auto it = byName_.find(word);
  if (it != byName_.end()) return it->second;
  const auto id = static_cast<WordId>(words_.size());
  byName_.emplace(word, id);
  words_.push_back(word);
  dfs_.push_back(0);
  placeOccs_.push_back(0);
  return id;
}

std::optional<WordId> Vocabulary::find(const std::string& word) const {
  const auto it = byName_.find(word);
  if (it == byName_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::word(WordId id) const { return words_.at(id); }

std::uint32_t Vocabulary::df(WordId id) const { return dfs_.at(id); }

std::uint64_t Vocabulary::placeOccurrences(WordId id) const {
  return placeOccs_.at(id);
}

void Vocabulary::ensureIds(std::size_t count) {
  while (words_.size() < count) {
    std::string name = "w" + std::to_string(words_.size());
    while (byName_.contains(name)) name += "_";
    intern(name);
  }
}

Vocabulary Vocabulary::restore(std::vector<std::string> words,
                               std::vector<std::uint32_t> dfs,
                               std::vector<std::uint64_t> placeOccs) {
  if (words.size() != dfs.size() || words.size() != placeOccs.size()) {
    throw std::invalid_argument("vocabulary counter lengths disagree");
  }
  Vocabulary v;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!v.byName_.emplace(words[i], static_cast<WordId>(i)).second) {
      throw std::invalid_argument("duplicate word in vocabulary");
    }
  }
  v.words_ = std::move(words);
  v.dfs_ = std::move(dfs);
  v.placeOccs_ = std::move(placeOccs);
  return v;
}

// --------------------------------------------------------------------------
// Fragment word association
// --------------------------------------------------------------------------

std::vector<std::vector<WordId>> associateFragmentWords(
    const std::vector<std::vector<WordId>>& rawWords, WordPolicy policy) {
  const std::size_t m = rawWords.size();
  std::vector<std::vector<WordId>> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t ordinal = i + 1;
    if (policy == WordPolicy::kPlain || ordinal % 2 == 1) {
      out[i] = rawWords[i];
    } else if (policy == WordPolicy::kNeighborUnion) {
      out[i] = sortedUnion(rawWords, i - 1, std::min(i + 1, m - 1));
    } else {  // kPrefix: everything up to and including the next fragment
      out[i] = sortedUnion(rawWords, 0, std::min(i + 1, m - 1));
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Build
// --------------------------------------------------------------------------

BckIndex BckIndex::build(std::span<const Trajectory> trajectories,
                         Vocabulary vocab,
                         std::vector<std::string> externalIds,
                         const BuildOptions& options) {
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].id() != i) {
      throw std::invalid_argument(
          "trajectory ids must be dense and sequential");
    }
  }
  if (!externalIds.empty() && externalIds.size() != trajectories.size()) {
    throw std::invalid_argument(
        "externalIds must be empty or match the trajectory count");
  }

  BckIndex ix;
  ix.policy_ = options.policy;
  ix.vocab_ = std::move(vocab);
  ix.grid_ = Grid::build(trajectories, options.segmentLimit, options.maxLevel,
                         options.bounds);

  WordId maxWord = 0;
  bool anyWord = false;
  for (const Trajectory& t : trajectories) {
    for (const Place& p : t.places()) {
      for (WordId w : p.keywords()) {
        maxWord = std::max(maxWord, w);
        anyWord = true;
      }
    }
  }
  if (anyWord) ix.vocab_.ensureIds(std::size_t{maxWord} + 1);

  std::vector<std::tuple<WordId, CellCode, TrajId>> c1Triples;
  std::vector<Component2::Entry> c2Entries;
  ix.leafTrajs_.assign(ix.grid_.leaves().size(), {});

  for (const Trajectory& t : trajectories) {
    // Counters and stats.
    ix.stats_.placeCount += t.size();
    ix.stats_.maxPlacesPerTrajectory = std::max(
        ix.stats_.maxPlacesPerTrajectory, static_cast<std::uint32_t>(t.size()));
    for (PlaceIndex i = 2; i <= t.size(); ++i) {
      ix.stats_.segmentLengthSum +=
          dist(t.place(i - 1).location(), t.place(i).location());
      ++ix.stats_.segmentCount;
    }
    for (WordId w : t.keywordUnion()) ix.vocab_.bumpDf(w);

    // Component 2: (traj, word) -> ascending place indices.
    std::vector<std::pair<WordId, PlaceIndex>> wordPlaces;
    for (PlaceIndex i = 1; i <= t.size(); ++i) {
      ix.stats_.keywordSlotCount += t.place(i).keywords().size();
      for (WordId w : t.place(i).keywords()) {
        ix.vocab_.bumpPlaceOccurrences(w);
        wordPlaces.emplace_back(w, i);
      }
    }
    std::sort(wordPlaces.begin(), wordPlaces.end());
    for (std::size_t i = 0; i < wordPlaces.size();) {
      std::size_t j = i;
      std::vector<PlaceIndex> places;
      while (j < wordPlaces.size() &&
             wordPlaces[j].first == wordPlaces[i].first) {
        places.push_back(wordPlaces[j].second);
        ++j;
      }
      c2Entries.emplace_back(c2Key(t.id(), wordPlaces[i].first),
                             std::move(places));
      i = j;
    }

    // Component 1 over associated fragment words, plus leaf occupancy.
    const auto fragments = fragmentTrajectory(t, ix.grid_);
    std::vector<std::vector<WordId>> raw(fragments.size());
    for (std::size_t f = 0; f < fragments.size(); ++f) {
      std::vector<WordId> u;
      for (PlaceIndex i = fragments[f].first; i <= fragments[f].last; ++i) {
        const auto& kws = t.place(i).keywords();
        u.insert(u.end(), kws.begin(), kws.end());
      }
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      raw[f] = std::move(u);
    }
    const auto assoc = associateFragmentWords(raw, options.policy);
    for (std::size_t f = 0; f < fragments.size(); ++f) {
      for (WordId w : assoc[f]) {
        c1Triples.emplace_back(w, fragments[f].cell.code, t.id());
      }
      auto& lt = ix.leafTrajs_[ix.grid_.leafIndexAt(fragments[f].cell.code)];
      if (lt.empty() || lt.back() != t.id()) lt.push_back(t.id());
    }

    // Geometry and external names.
    std::vector<Point> pts;
    pts.reserve(t.size());
    for (const Place& p : t.places()) pts.push_back(p.location());
    ix.geometry_.push_back(std::move(pts));
    ix.externalIds_.push_back(externalIds.empty()
                                  ? std::to_string(t.id())
                                  : std::move(externalIds[t.id()]));
  }
  ix.stats_.trajectoryCount = static_cast<std::uint32_t>(trajectories.size());

  std::sort(c1Triples.begin(), c1Triples.end());
  c1Triples.erase(std::unique(c1Triples.begin(), c1Triples.end()),
                  c1Triples.end());
  std::vector<Component1::Entry> c1Entries;
  for (std::size_t i = 0; i < c1Triples.size();) {
    std::size_t j = i;
    std::vector<TrajId> postings;
    while (j < c1Triples.size() &&
           std::get<0>(c1Triples[j]) == std::get<0>(c1Triples[i]) &&
           std::get<1>(c1Triples[j]) == std::get<1>(c1Triples[i])) {
      postings.push_back(std::get<2>(c1Triples[j]));
      ++j;
    }
    c1Entries.emplace_back(
        c1Key(std::get<0>(c1Triples[i]), std::get<1>(c1Triples[i])),
        std::move(postings));
    i = j;
  }
  ix.c1_ = Component1::fromSorted(std::move(c1Entries));
  ix.c2_ = Component2::fromSorted(std::move(c2Entries));
  return ix;
}

// --------------------------------------------------------------------------
// Queries
// --------------------------------------------------------------------------

BckIndex::IntervalScanResult BckIndex::getCellsInInterval(
    WordId word, ZInterval interval) const {
  if (interval.sid > interval.eid) {
    throw std::invalid_argument("interval start exceeds its end");
  }
  IntervalScanResult result;
  const auto& entries = c1_.entries();
  for (std::size_t i = c1_.seek(c1Key(word, interval.sid));
       i < entries.size(); ++i) {
    const auto [w, cell] = decodeC1Key(entries[i].first);
    if (w != word || cell > interval.eid) break;
    result.cells.push_back(CellPostings{cell, entries[i].second});
  }
  if (!result.cells.empty()) {
    result.shrunk =
        ZInterval{result.cells.front().cell, result.cells.back().cell};
  }
  return result;
}

std::vector<std::span<const PlaceIndex>> BckIndex::placePostings(
    TrajId traj, std::span<const WordId> words) const {
  if (traj >= stats_.trajectoryCount) {
    throw std::out_of_range("unknown trajectory");
  }
  std::vector<std::span<const PlaceIndex>> out;
  out.reserve(words.size());
  for (WordId w : words) {
    const auto* list = c2_.find(c2Key(traj, w));
    out.push_back(list ? std::span<const PlaceIndex>(*list)
                       : std::span<const PlaceIndex>{});
  }
  return out;
}

std::span<const Point> BckIndex::trajectoryPoints(TrajId traj) const {
  if (traj >= geometry_.size()) throw std::out_of_range("unknown trajectory");
  return geometry_[traj];
}

const std::string& BckIndex::externalId(TrajId traj) const {
  if (traj >= externalIds_.size()) {
    throw std::out_of_range("unknown trajectory");
  }
  return externalIds_[traj];
}

// --------------------------------------------------------------------------
// Insertion
// --------------------------------------------------------------------------

std::vector<std::vector<WordId>> BckIndex::perPlaceWords(TrajId traj) const {
  std::vector<std::vector<WordId>> out(geometry_[traj].size());
  const auto& entries = c2_.entries();
  for (std::size_t i = c2_.seek(c2Key(traj, 0)); i < entries.size(); ++i) {
    const auto [t, w] = decodeC2Key(entries[i].first);
    if (t != traj) break;
    for (PlaceIndex p : entries[i].second) out[p - 1].push_back(w);
  }
  return out;
}

std::vector<std::pair<WordId, CellCode>> BckIndex::deriveC1Entries(
    TrajId traj) const {
  const auto fragments = fragmentPoints(traj, geometry_[traj], grid_);
  const auto perPlace = perPlaceWords(traj);
  std::vector<std::vector<WordId>> raw(fragments.size());
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    raw[f] = sortedUnion(perPlace, fragments[f].first - 1,
                         fragments[f].last - 1);
  }
  const auto assoc = associateFragmentWords(raw, policy_);
  std::vector<std::pair<WordId, CellCode>> out;
  for (std::size_t f = 0; f < fragments.size(); ++f) {
    for (WordId w : assoc[f]) out.emplace_back(w, fragments[f].cell.code);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void BckIndex::addC1(TrajId traj) {
  for (const auto& [w, cell] : deriveC1Entries(traj)) {
    insertSorted(c1_.obtain(c1Key(w, cell)), traj);
  }
}

void BckIndex::removeC1(TrajId traj) {
  for (const auto& [w, cell] : deriveC1Entries(traj)) {
    const C1Key key = c1Key(w, cell);
    auto* list = c1_.find(key);
    if (list == nullptr) continue;
    eraseSorted(*list, traj);
    if (list->empty()) c1_.erase(key);  // empty cells are not indexed
  }
}

void BckIndex::splitOverloadedLeaves() {
  for (;;) {
    std::size_t li = leafTrajs_.size();
    for (std::size_t i = 0; i < grid_.leaves().size(); ++i) {
      const auto& leaf = grid_.leaves()[i];
      if (leaf.load > grid_.segmentLimit() && leaf.level < grid_.maxLevel()) {
        li = i;
        break;
      }
    }
    if (li == leafTrajs_.size()) break;

    // Fragment ordinals of every trajectory through the leaf can shift, so
    // their word-cell associations are recomputed from scratch.
    const std::vector<TrajId> affected = leafTrajs_[li];
    for (TrajId t : affected) removeC1(t);

    const std::size_t child0 = grid_.splitLeaf(li);
    leafTrajs_.erase(leafTrajs_.begin() + static_cast<std::ptrdiff_t>(li));
    leafTrajs_.insert(leafTrajs_.begin() + static_cast<std::ptrdiff_t>(li), 4,
                      std::vector<TrajId>{});
    for (TrajId t : affected) {
      for (const Fragment& f : fragmentPoints(t, geometry_[t], grid_)) {
        const std::size_t fi = grid_.leafIndexAt(f.cell.code);
        if (fi < child0 || fi >= child0 + 4) continue;
        grid_.setLeafLoad(fi, grid_.leaves()[fi].load +
                                  (f.last - f.first + 1));
        auto& lt = leafTrajs_[fi];
        if (lt.empty() || lt.back() != t) lt.push_back(t);
      }
    }
    for (TrajId t : affected) addC1(t);
    ++stats_.splitCount;
  }
}

void BckIndex::insertTrajectory(const Trajectory& traj,
                                std::string externalId) {
  if (traj.id() != stats_.trajectoryCount) {
    throw std::invalid_argument("trajectory ids must be dense and sequential");
  }
  // Throws before any mutation when a place falls outside the bounds.
  const auto fragments = fragmentTrajectory(traj, grid_);

  WordId maxWord = 0;
  bool anyWord = false;
  for (const Place& p : traj.places()) {
    for (WordId w : p.keywords()) {
      maxWord = std::max(maxWord, w);
      anyWord = true;
    }
  }
  if (anyWord) vocab_.ensureIds(std::size_t{maxWord} + 1);

  stats_.placeCount += traj.size();
  stats_.maxPlacesPerTrajectory = std::max(
      stats_.maxPlacesPerTrajectory, static_cast<std::uint32_t>(traj.size()));
  for (PlaceIndex i = 2; i <= traj.size(); ++i) {
    stats_.segmentLengthSum +=
        dist(traj.place(i - 1).location(), traj.place(i).location());
    ++stats_.segmentCount;
  }
  for (WordId w : traj.keywordUnion()) vocab_.bumpDf(w);

  for (PlaceIndex i = 1; i <= traj.size(); ++i) {
    stats_.keywordSlotCount += traj.place(i).keywords().size();
    for (WordId w : traj.place(i).keywords()) {
      vocab_.bumpPlaceOccurrences(w);
      c2_.obtain(c2Key(traj.id(), w)).push_back(i);
    }
  }

  std::vector<Point> pts;
  pts.reserve(traj.size());
  for (const Place& p : traj.places()) pts.push_back(p.location());
  geometry_.push_back(std::move(pts));
  externalIds_.push_back(externalId.empty() ? std::to_string(traj.id())
                                            : std::move(externalId));
  ++stats_.trajectoryCount;

  for (const Fragment& f : fragments) {
    const std::size_t li = grid_.leafIndexAt(f.cell.code);
    grid_.setLeafLoad(li, grid_.leaves()[li].load + (f.last - f.first + 1));
    auto& lt = leafTrajs_[li];
    if (lt.empty() || lt.back() != traj.id()) lt.push_back(traj.id());
  }
  addC1(traj.id());
  splitOverloadedLeaves();
}

void BckIndex::rebuildLeafOccupancy() {
  leafTrajs_.assign(grid_.leaves().size(), {});
  for (TrajId t = 0; t < geometry_.size(); ++t) {
    for (const Fragment& f : fragmentPoints(t, geometry_[t], grid_)) {
      auto& lt = leafTrajs_[grid_.leafIndexAt(f.cell.code)];
      if (lt.empty() || lt.back() != t) lt.push_back(t);
    }
  }
}

bool BckIndex::operator==(const BckIndex& other) const {
  return grid_ == other.grid_ && vocab_ == other.vocab_ &&
         c1_ == other.c1_ && c2_ == other.c2_ && stats_ == other.stats_ &&
         policy_ == other.policy_ && geometry_ == other.geometry_ &&
         externalIds_ == other.externalIds_;
}

std::vector<Trajectory> materializeTrajectories(const BckIndex& index) {
  const std::uint32_t n = index.trajectoryCount();
  std::vector<std::vector<std::vector<WordId>>> words(n);
  for (TrajId t = 0; t < n; ++t) {
    words[t].resize(index.trajectoryPoints(t).size());
  }
  for (const auto& [key, places] : index.component2().entries()) {
    const auto [traj, word] = decodeC2Key(key);
    for (PlaceIndex p : places) {
      words[traj][p - 1].push_back(word);
    }
  }
  std::vector<Trajectory> out;
  out.reserve(n);
  for (TrajId t = 0; t < n; ++t) {
    const auto points = index.trajectoryPoints(t);
    std::vector<Place> placeList;
    placeList.reserve(points.size());
    for (std::size_t p = 0; p < points.size(); ++p) {
      placeList.emplace_back(points[p], std::move(words[t][p]));
    }
    out.emplace_back(t, std::move(placeList));
  }
  return out;
}

}  // namespace tksk
