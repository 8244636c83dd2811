#include "tksk/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "tksk/baselines.hpp"

namespace tksk {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

[[noreturn]] void failAt(const std::string& name, std::size_t line,
                         const std::string& what) {
  throw std::runtime_error(name + ":" + std::to_string(line) + ": " + what);
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

std::string lowercased(std::string s) {
  for (char& c : s) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return s;
}

double finiteNumber(const json& j, const char* field,
                    const std::string& name, std::size_t line) {
  if (!j.contains(field) || !j[field].is_number()) {
    failAt(name, line, std::string("expected a number \"") + field + "\"");
  }
  const double v = j[field].get<double>();
  if (!std::isfinite(v)) {
    failAt(name, line, std::string("non-finite \"") + field + "\"");
  }
  return v;
}

std::vector<std::string> keywordStrings(const json& j, const std::string& name,
                                        std::size_t line) {
  if (!j.contains("kw") || !j["kw"].is_array()) {
    failAt(name, line, "expected a string array \"kw\"");
  }
  std::vector<std::string> out;
  for (const json& kw : j["kw"]) {
    if (!kw.is_string()) {
      failAt(name, line, "keywords must be strings");
    }
    out.push_back(lowercased(kw.get<std::string>()));
  }
  return out;
}

json parsedLine(const std::string& line, const std::string& name,
                std::size_t lineNo) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    failAt(name, lineNo, "not a JSON object");
  }
  return j;
}

std::ifstream openOrThrow(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open " + path);
  }
  return in;
}

std::ofstream createOrThrow(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot create " + path);
  }
  return out;
}

double uniformReal(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

std::uint64_t uniformIndex(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;
}

}  // namespace

LoadedCorpus loadCorpus(const std::string& path) {
  std::ifstream in = openOrThrow(path);
  return parseCorpus(in, path);
}

LoadedCorpus parseCorpus(std::istream& in, const std::string& name) {
  LoadedCorpus out;
  std::unordered_set<std::string> seenIds;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (blank(line)) {
      continue;
    }
    const json j = parsedLine(line, name, lineNo);
    if (!j.contains("id") || !j["id"].is_string()) {
      failAt(name, lineNo, "expected a string \"id\"");
    }
    const std::string id = j["id"].get<std::string>();
    if (!seenIds.insert(id).second) {
      failAt(name, lineNo, "duplicate trajectory id \"" + id + "\"");
    }
    if (!j.contains("places") || !j["places"].is_array() ||
        j["places"].empty()) {
      failAt(name, lineNo, "expected a non-empty array \"places\"");
    }
    std::vector<Place> places;
    for (const json& pj : j["places"]) {
      if (!pj.is_object()) {
        failAt(name, lineNo, "places must be objects");
      }
      const double x = finiteNumber(pj, "x", name, lineNo);
      const double y = finiteNumber(pj, "y", name, lineNo);
      std::vector<WordId> words;
      for (const std::string& kw : keywordStrings(pj, name, lineNo)) {
        words.push_back(out.vocab.intern(kw));
      }
      places.emplace_back(Point{x, y}, std::move(words));
    }
    out.trajectories.emplace_back(
        static_cast<TrajId>(out.trajectories.size()), std::move(places));
    out.externalIds.push_back(id);
  }
  return out;
}

void writeCorpus(std::ostream& out, std::span<const Trajectory> trajectories,
                 const Vocabulary& vocab,
                 std::span<const std::string> externalIds) {
  if (!externalIds.empty() && externalIds.size() != trajectories.size()) {
    throw std::invalid_argument("external id list does not match the corpus");
  }
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    ordered_json j;
    j["id"] = externalIds.empty() ? std::to_string(i)
                                  : externalIds[i];
    ordered_json places = ordered_json::array();
    for (const Place& p : trajectories[i].places()) {
      ordered_json pj;
      pj["x"] = p.x();
      pj["y"] = p.y();
      ordered_json kws = ordered_json::array();
      for (WordId w : p.keywords()) {
        kws.push_back(vocab.word(w));
      }
      pj["kw"] = std::move(kws);
      places.push_back(std::move(pj));
    }
    j["places"] = std::move(places);
    out << j.dump() << '\n';
  }
}

void saveCorpus(const std::string& path,
                std::span<const Trajectory> trajectories,
                const Vocabulary& vocab,
                std::span<const std::string> externalIds) {
  std::ofstream out = createOrThrow(path);
  writeCorpus(out, trajectories, vocab, externalIds);
  if (!out) {
    throw std::runtime_error("write failed for " + path);
  }
}

std::vector<double> zipfProbabilities(std::uint32_t vocabSize,
                                      double exponent) {
  if (vocabSize == 0) {
    throw std::invalid_argument("vocabulary must be non-empty");
  }
  if (!(exponent >= 0.0)) {
    throw std::invalid_argument("Zipf exponent must be non-negative");
  }
  std::vector<double> p(vocabSize);
  double total = 0.0;
  for (std::uint32_t r = 0; r < vocabSize; ++r) {
    p[r] = std::pow(static_cast<double>(r) + 1.0, -exponent);
    total += p[r];
  }
  for (double& v : p) {
    v /= total;
  }
  return p;
}

std::vector<Trajectory> generateCorpus(const CorpusSpec& spec) {
  if (spec.placesPerTrajectory == 0) {
    throw std::invalid_argument("trajectories need at least one place");
  }
  if (spec.maxKeywordsPerPlace == 0) {
    throw std::invalid_argument("places need at least one keyword");
  }
  if (!(spec.clustering >= 0.0 && spec.clustering <= 1.0)) {
    throw std::invalid_argument("clustering must lie in [0,1]");
  }
  if (!(spec.extent > 0.0) || !(spec.meanStep > 0.0)) {
    throw std::invalid_argument("extent and step must be positive");
  }
  const std::vector<double> zipf =
      zipfProbabilities(spec.vocabSize, spec.zipfExponent);
  std::vector<double> cumulative(zipf.size());
  double run = 0.0;
  for (std::size_t i = 0; i < zipf.size(); ++i) {
    run += zipf[i];
    cumulative[i] = run;
  }
  cumulative.back() = 1.0;

  std::mt19937_64 rng(spec.seed);
  constexpr int kHotspots = 5;
  std::vector<Point> hotspots;
  for (int h = 0; h < kHotspots; ++h) {
    hotspots.push_back({uniformReal(rng, 0.0, spec.extent),
                        uniformReal(rng, 0.0, spec.extent)});
  }

  const auto clamp = [&](double v) {
    return std::clamp(v, 0.0, spec.extent);
  };
  const auto drawWord = [&](std::mt19937_64& r) {
    const double u = uniformReal(r, 0.0, 1.0);
    const auto it =
        std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return static_cast<WordId>(it - cumulative.begin());
  };

  std::vector<Trajectory> out;
  out.reserve(spec.trajectoryCount);
  for (TrajId id = 0; id < spec.trajectoryCount; ++id) {
    Point at;
    if (uniformReal(rng, 0.0, 1.0) < spec.clustering) {
      const Point& h = hotspots[uniformIndex(rng, kHotspots)];
      const double r = spec.extent / 20.0;
      at = {clamp(h.x + uniformReal(rng, -r, r)),
            clamp(h.y + uniformReal(rng, -r, r))};
    } else {
      at = {uniformReal(rng, 0.0, spec.extent),
            uniformReal(rng, 0.0, spec.extent)};
    }
    std::vector<Place> places;
    for (std::uint32_t p = 0; p < spec.placesPerTrajectory; ++p) {
      if (p > 0) {
        const double angle = uniformReal(rng, 0.0, 2.0 * M_PI);
        const double step =
            spec.meanStep * uniformReal(rng, 0.5, 1.5);
        at = {clamp(at.x + step * std::cos(angle)),
              clamp(at.y + step * std::sin(angle))};
      }
      const std::uint32_t count =
          1 + static_cast<std::uint32_t>(
                  uniformIndex(rng, spec.maxKeywordsPerPlace));
      std::vector<WordId> words;
      for (std::uint32_t w = 0; w < count; ++w) {
        words.push_back(drawWord(rng));
      }
      places.emplace_back(at, std::move(words));
    }
    out.emplace_back(id, std::move(places));
  }
  return out;
}

std::vector<Query> generateQueries(std::span<const Trajectory> corpus,
                                   const WorkloadSpec& spec) {
  if (spec.keywordsPerQuery == 0 || spec.k == 0) {
    throw std::invalid_argument("workload counts must be positive");
  }
  if (!(spec.locationRadius >= 0.0)) {
    throw std::invalid_argument("location radius must be non-negative");
  }
  if (spec.queryCount == 0) {
    return {};
  }
  if (corpus.empty()) {
    throw std::invalid_argument("cannot sample queries from an empty corpus");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].keywordUnion().size() >= spec.keywordsPerQuery) {
      eligible.push_back(i);
    }
  }
  if (eligible.empty()) {
    throw std::runtime_error(
        "no trajectory offers " + std::to_string(spec.keywordsPerQuery) +
        " distinct keywords");
  }
  std::mt19937_64 rng(spec.seed);
  std::vector<Query> out;
  out.reserve(spec.queryCount);
  for (std::uint32_t qi = 0; qi < spec.queryCount; ++qi) {
    const Trajectory& t =
        corpus[eligible[uniformIndex(rng, eligible.size())]];
    std::vector<WordId> pool = t.keywordUnion();
    // Partial Fisher-Yates: the first keywordsPerQuery slots become the
    // sample, with explicit draws so workloads replay across platforms.
    for (std::uint32_t s = 0; s < spec.keywordsPerQuery; ++s) {
      const std::size_t j =
          s + uniformIndex(rng, pool.size() - s);
      std::swap(pool[s], pool[j]);
    }
    pool.resize(spec.keywordsPerQuery);
    const BoundingBox box = trajectoryMBR(t).box;
    const Point location{
        uniformReal(rng, box.minX - spec.locationRadius,
                    box.maxX + spec.locationRadius),
        uniformReal(rng, box.minY - spec.locationRadius,
                    box.maxY + spec.locationRadius)};
    out.push_back(makeQuery(location, std::move(pool), spec.k));
  }
  return out;
}

std::vector<Query> loadWorkload(const std::string& path,
                                const Vocabulary& vocab) {
  std::ifstream in = openOrThrow(path);
  return parseWorkload(in, path, vocab);
}

std::vector<Query> parseWorkload(std::istream& in, const std::string& name,
                                 const Vocabulary& vocab) {
  std::vector<Query> out;
  std::unordered_map<std::string, WordId> unknowns;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (blank(line)) {
      continue;
    }
    const json j = parsedLine(line, name, lineNo);
    const double x = finiteNumber(j, "x", name, lineNo);
    const double y = finiteNumber(j, "y", name, lineNo);
    if (!j.contains("k") || !j["k"].is_number_integer() ||
        j["k"].get<std::int64_t>() < 1 ||
        j["k"].get<std::int64_t>() > 1'000'000'000) {
      failAt(name, lineNo, "expected a positive integer \"k\"");
    }
    const auto k = j["k"].get<std::uint32_t>();
    std::vector<WordId> words;
    for (const std::string& kw : keywordStrings(j, name, lineNo)) {
      if (const auto id = vocab.find(kw)) {
        words.push_back(*id);
      } else {
        const auto [it, fresh] = unknowns.try_emplace(
            kw, static_cast<WordId>(vocab.size() + unknowns.size()));
        words.push_back(it->second);
        (void)fresh;
      }
    }
    if (words.empty()) {
      failAt(name, lineNo, "queries need at least one keyword");
    }
    out.push_back(makeQuery({x, y}, std::move(words), k));
  }
  return out;
}

void writeWorkload(std::ostream& out, std::span<const Query> queries,
                   const Vocabulary& vocab) {
  for (const Query& q : queries) {
    ordered_json j;
    j["x"] = q.location.x;
    j["y"] = q.location.y;
    ordered_json kws = ordered_json::array();
    for (WordId w : q.keywords) {
      if (w >= vocab.size()) {
        throw std::invalid_argument("query word is not in the vocabulary");
      }
      kws.push_back(vocab.word(w));
    }
    j["kw"] = std::move(kws);
    j["k"] = q.k;
    out << j.dump() << '\n';
  }
}

void saveWorkload(const std::string& path, std::span<const Query> queries,
                  const Vocabulary& vocab) {
  std::ofstream out = createOrThrow(path);
  writeWorkload(out, queries, vocab);
  if (!out) {
    throw std::runtime_error("write failed for " + path);
  }
}

}  // namespace tksk
