#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"
#include "tksk/baselines.hpp"
#include "tksk/ingest.hpp"
#include "tksk/model.hpp"

namespace {

using namespace tksk;

LoadedCorpus parse(const std::string& text) {
  std::istringstream in(text);
  return parseCorpus(in, "fixture");
}

// The thrown message must carry the file name and line number.
void checkFailsAt(const std::string& text, int line,
                  const std::string& needle = "") {
  std::istringstream in(text);
  try {
    parseCorpus(in, "fixture");
    FAIL("expected a parse failure");
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    CHECK(what.find("fixture:" + std::to_string(line) + ":") !=
          std::string::npos);
    if (!needle.empty()) {
      CHECK(what.find(needle) != std::string::npos);
    }
  }
}

bool sameTrajectories(const std::vector<Trajectory>& a,
                      const std::vector<Trajectory>& b) {
  if (a.size() != b.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].id() != b[i].id() || a[i].size() != b[i].size()) {
      return false;
    }
    for (PlaceIndex p = 1; p <= a[i].size(); ++p) {
      if (!(a[i].place(p).location() == b[i].place(p).location()) ||
          a[i].place(p).keywords() != b[i].place(p).keywords()) {
        return false;
      }
    }
  }
  return true;
}

std::vector<std::string> keywordNames(const Place& place,
                                      const Vocabulary& vocab) {
  std::vector<std::string> names;
  for (WordId w : place.keywords()) {
    names.push_back(vocab.word(w));
  }
  std::sort(names.begin(), names.end());
  return names;
}

// Critical value of a chi-squared variable via the Wilson-Hilferty cube
// approximation at normal quantile z.
double chiSquaredCritical(double dof, double z) {
  const double a = 2.0 / (9.0 * dof);
  const double c = 1.0 - a + z * std::sqrt(a);
  return dof * c * c * c;
}

}  // namespace

TEST_CASE("an empty file loads as an empty corpus") {
  const LoadedCorpus empty = parse("");
  CHECK(empty.trajectories.empty());
  CHECK(empty.externalIds.empty());
  CHECK(empty.vocab.size() == 0);

  const LoadedCorpus blanks = parse("\n   \n\t\n");
  CHECK(blanks.trajectories.empty());
}

TEST_CASE("a one-line fixture loads exactly") {
  const LoadedCorpus c = parse(
      R"({"id": "walk-1", "places": [)"
      R"({"x": 1.5, "y": -2.0, "kw": ["Cafe", "PARK", "cafe"]},)"
      R"({"x": 3.0, "y": 4.5, "kw": []}]})"
      "\n");
  REQUIRE(c.trajectories.size() == 1);
  CHECK(c.externalIds == std::vector<std::string>{"walk-1"});
  const Trajectory& t = c.trajectories[0];
  CHECK(t.id() == 0);
  REQUIRE(t.size() == 2);
  CHECK(t.place(1).location() == Point{1.5, -2.0});
  // Lowercased, deduplicated, first-seen ids: cafe then park.
  CHECK(t.place(1).keywords() == std::vector<WordId>{0, 1});
  CHECK(c.vocab.word(0) == "cafe");
  CHECK(c.vocab.word(1) == "park");
  CHECK(t.place(2).keywords().empty());
  CHECK(c.vocab.size() == 2);
}

TEST_CASE("word ids follow first encounter across lines") {
  const LoadedCorpus c = parse(
      R"({"id": "a", "places": [{"x": 0, "y": 0, "kw": ["beta"]}]})"
      "\n"
      R"({"id": "b", "places": [{"x": 1, "y": 1, "kw": ["alpha", "beta"]}]})"
      "\n");
  CHECK(c.vocab.word(0) == "beta");
  CHECK(c.vocab.word(1) == "alpha");
  CHECK(c.trajectories[1].place(1).keywords() ==
        std::vector<WordId>{0, 1});
}

TEST_CASE("loader errors name the offending line") {
  const std::string good =
      R"({"id": "a", "places": [{"x": 0, "y": 0, "kw": ["w"]}]})";

  checkFailsAt(good + "\nnot json\n", 2);
  checkFailsAt(good + "\n" + good + "\n", 2, "duplicate");
  checkFailsAt(R"({"id": 7, "places": []})" "\n", 1, "id");
  checkFailsAt(R"({"id": "a", "places": []})" "\n", 1, "places");
  checkFailsAt(R"({"id": "a"})" "\n", 1, "places");
  checkFailsAt(
      R"({"id": "a", "places": [{"x": 0, "kw": []}]})" "\n", 1, "y");
  checkFailsAt(
      R"({"id": "a", "places": [{"x": 1e999, "y": 0, "kw": []}]})" "\n", 1);
  checkFailsAt(
      R"({"id": "a", "places": [{"x": "0", "y": 0, "kw": []}]})" "\n", 1,
      "x");
  checkFailsAt(
      R"({"id": "a", "places": [{"x": 0, "y": 0, "kw": [3]}]})" "\n", 1,
      "keywords");
  checkFailsAt(good + "\n[1, 2]\n", 2, "object");

  CHECK_THROWS_AS(loadCorpus("/nonexistent/corpus.jsonl"),
                  std::runtime_error);
}

TEST_CASE("zipf rank probabilities") {
  const std::vector<double> p = zipfProbabilities(4, 1.0);
  REQUIRE(p.size() == 4);
  CHECK(p[0] == doctest::Approx(12.0 / 25.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(6.0 / 25.0).epsilon(1e-15));
  CHECK(p[2] == doctest::Approx(4.0 / 25.0).epsilon(1e-15));
  CHECK(p[3] == doctest::Approx(3.0 / 25.0).epsilon(1e-15));

  const std::vector<double> flat = zipfProbabilities(8, 0.0);
  for (double v : flat) {
    CHECK(v == doctest::Approx(0.125).epsilon(1e-15));
  }

  for (double expo : {0.5, 1.0, 1.8}) {
    const std::vector<double> probs = zipfProbabilities(100, expo);
    double sum = 0.0;
    for (std::size_t r = 0; r + 1 < probs.size(); ++r) {
      CHECK(probs[r] >= probs[r + 1]);
      sum += probs[r];
    }
    sum += probs.back();
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(zipfProbabilities(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(zipfProbabilities(5, -0.5), std::invalid_argument);
}

TEST_CASE("generated corpora are deterministic and shaped to spec") {
  CorpusSpec spec;
  spec.trajectoryCount = 50;
  spec.placesPerTrajectory = 12;
  spec.vocabSize = 40;
  spec.clustering = 0.3;
  spec.seed = 7;
  spec.extent = 500.0;
  spec.meanStep = 8.0;

  const std::vector<Trajectory> a = generateCorpus(spec);
  const std::vector<Trajectory> b = generateCorpus(spec);
  CHECK(sameTrajectories(a, b));

  REQUIRE(a.size() == 50);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id() == i);
    REQUIRE(a[i].size() == 12);
    for (PlaceIndex p = 1; p <= a[i].size(); ++p) {
      const Place& place = a[i].place(p);
      CHECK(place.x() >= 0.0);
      CHECK(place.x() <= spec.extent);
      CHECK(place.y() >= 0.0);
      CHECK(place.y() <= spec.extent);
      CHECK(place.keywords().size() >= 1);
      CHECK(place.keywords().size() <= 4);
      for (WordId w : place.keywords()) {
        CHECK(w < spec.vocabSize);
      }
      if (p > 1) {
        // Border clamping only ever shortens a step.
        CHECK(dist(place.location(), a[i].place(p - 1).location()) <=
              1.5 * spec.meanStep + 1e-9);
      }
    }
  }

  // A different seed moves the data.
  auto other = spec;
  other.seed = 8;
  CHECK_FALSE(sameTrajectories(a, generateCorpus(other)));

  auto none = spec;
  none.trajectoryCount = 0;
  CHECK(generateCorpus(none).empty());

  auto bad = spec;
  bad.clustering = 1.5;
  CHECK_THROWS_AS(generateCorpus(bad), std::invalid_argument);
  bad = spec;
  bad.placesPerTrajectory = 0;
  CHECK_THROWS_AS(generateCorpus(bad), std::invalid_argument);
}

TEST_CASE("clustering concentrates walk starts") {
  CorpusSpec spec;
  spec.trajectoryCount = 400;
  spec.placesPerTrajectory = 2;
  spec.vocabSize = 10;
  spec.seed = 99;
  spec.extent = 1000.0;
  spec.meanStep = 1.0;

  // Hotspot placement packs starts densely: the mean nearest-neighbor
  // distance collapses relative to uniform placement.
  const auto nearestNeighborSpread = [](const std::vector<Trajectory>& ts) {
    double sum = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      double best = kNoMatch;
      for (std::size_t j = 0; j < ts.size(); ++j) {
        if (j != i) {
          best = std::min(best, dist(ts[i].place(1).location(),
                                     ts[j].place(1).location()));
        }
      }
      sum += best;
    }
    return sum / static_cast<double>(ts.size());
  };
  spec.clustering = 0.0;
  const double uniformSpread = nearestNeighborSpread(generateCorpus(spec));
  spec.clustering = 1.0;
  const double hotspotSpread = nearestNeighborSpread(generateCorpus(spec));
  CHECK(hotspotSpread < 0.5 * uniformSpread);
}

TEST_CASE("keyword ranks follow the requested Zipf law") {
  CorpusSpec spec;
  spec.trajectoryCount = 4000;
  spec.placesPerTrajectory = 10;
  spec.vocabSize = 60;
  spec.seed = 20260816;
  spec.zipfExponent = 1.0;
  const std::vector<Trajectory> corpus = generateCorpus(spec);

  const double places =
      static_cast<double>(spec.trajectoryCount) * spec.placesPerTrajectory;
  std::vector<double> observed(spec.vocabSize, 0.0);
  for (const Trajectory& t : corpus) {
    for (const Place& p : t.places()) {
      for (WordId w : p.keywords()) {
        observed[w] += 1.0;
      }
    }
  }

  // Per-place presence probability: keyword counts draw uniformly from
  // 1..max, each slot i.i.d. Zipf, then the place set deduplicates.
  const auto presenceFit = [&](const std::vector<double>& rankProb) {
    double stat = 0.0;
    for (std::uint32_t w = 0; w < spec.vocabSize; ++w) {
      double q = 0.0;
      for (std::uint32_t c = 1; c <= spec.maxKeywordsPerPlace; ++c) {
        q += 1.0 - std::pow(1.0 - rankProb[w], c);
      }
      q /= spec.maxKeywordsPerPlace;
      const double expected = places * q;
      stat += (observed[w] - expected) * (observed[w] - expected) / expected;
    }
    return stat;
  };

  const double crit =
      chiSquaredCritical(static_cast<double>(spec.vocabSize) - 1.0, 3.09);
  const double fitRequested =
      presenceFit(zipfProbabilities(spec.vocabSize, spec.zipfExponent));
  const double fitUniform =
      presenceFit(zipfProbabilities(spec.vocabSize, 0.0));
  CHECK(fitRequested < crit);
  // The same histogram must reject a flat law, or the test has no power.
  CHECK(fitUniform > crit);
}

TEST_CASE("corpus files round-trip") {
  CorpusSpec spec;
  spec.trajectoryCount = 25;
  spec.placesPerTrajectory = 6;
  spec.vocabSize = 30;
  spec.clustering = 0.5;
  spec.seed = 3;
  const std::vector<Trajectory> corpus = generateCorpus(spec);
  Vocabulary vocab;
  vocab.ensureIds(spec.vocabSize);

  std::ostringstream first;
  writeCorpus(first, corpus, vocab);
  std::istringstream back(first.str());
  const LoadedCorpus loaded = parseCorpus(back, "round-trip");

  REQUIRE(loaded.trajectories.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded.externalIds[i] == std::to_string(i));
    REQUIRE(loaded.trajectories[i].size() == corpus[i].size());
    for (PlaceIndex p = 1; p <= corpus[i].size(); ++p) {
      const Place& orig = corpus[i].place(p);
      const Place& got = loaded.trajectories[i].place(p);
      CHECK(orig.location() == got.location());
      CHECK(keywordNames(orig, vocab) == keywordNames(got, loaded.vocab));
    }
  }

  // One load normalizes word ids; after that the representation is a
  // fixpoint of save-then-load.
  std::ostringstream second;
  writeCorpus(second, loaded.trajectories, loaded.vocab, loaded.externalIds);
  std::istringstream again(second.str());
  const LoadedCorpus reloaded = parseCorpus(again, "round-trip");
  std::ostringstream third;
  writeCorpus(third, reloaded.trajectories, reloaded.vocab,
              reloaded.externalIds);
  CHECK(second.str() == third.str());
  CHECK(sameTrajectories(loaded.trajectories, reloaded.trajectories));
}

TEST_CASE("workload generation guarantees matches") {
  CorpusSpec cs;
  cs.trajectoryCount = 60;
  cs.placesPerTrajectory = 8;
  cs.vocabSize = 30;
  cs.seed = 21;
  const std::vector<Trajectory> corpus = generateCorpus(cs);

  WorkloadSpec ws;
  ws.queryCount = 40;
  ws.keywordsPerQuery = 3;
  ws.k = 5;
  ws.seed = 11;
  ws.locationRadius = 25.0;

  const std::vector<Query> queries = generateQueries(corpus, ws);
  REQUIRE(queries.size() == 40);
  for (const Query& q : queries) {
    CHECK(q.k == 5);
    CHECK(q.keywords.size() == 3);
    const TopKAnswer hit = bruteForceTopK(q, corpus);
    CHECK(hit.results.size() >= 1);
  }

  const std::vector<Query> replay = generateQueries(corpus, ws);
  REQUIRE(replay.size() == queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    CHECK(queries[i].location == replay[i].location);
    CHECK(queries[i].keywords == replay[i].keywords);
    CHECK(queries[i].k == replay[i].k);
  }

  SUBCASE("trivia and failure modes") {
    auto none = ws;
    none.queryCount = 0;
    CHECK(generateQueries(corpus, none).empty());

    auto greedy = ws;
    greedy.keywordsPerQuery = 1000;
    CHECK_THROWS_AS(generateQueries(corpus, greedy), std::runtime_error);

    CHECK_THROWS_AS(generateQueries({}, ws), std::invalid_argument);

    auto zeroK = ws;
    zeroK.k = 0;
    CHECK_THROWS_AS(generateQueries(corpus, zeroK), std::invalid_argument);
  }
}

TEST_CASE("workload files round-trip through the vocabulary") {
  const LoadedCorpus c = parse(
      R"({"id": "a", "places": [{"x": 0, "y": 0, "kw": ["cafe", "park"]},)"
      R"({"x": 2, "y": 1, "kw": ["museum", "cafe"]}]})"
      "\n"
      R"({"id": "b", "places": [{"x": 9, "y": 9, "kw": ["park", "pier"]}]})"
      "\n");

  WorkloadSpec ws;
  ws.queryCount = 12;
  ws.keywordsPerQuery = 2;
  ws.k = 3;
  ws.seed = 5;
  ws.locationRadius = 4.0;
  const std::vector<Query> queries = generateQueries(c.trajectories, ws);

  std::ostringstream text;
  writeWorkload(text, queries, c.vocab);
  std::istringstream in(text.str());
  const std::vector<Query> loaded = parseWorkload(in, "wl", c.vocab);
  REQUIRE(loaded.size() == queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    CHECK(loaded[i].location == queries[i].location);
    CHECK(loaded[i].keywords == queries[i].keywords);
    CHECK(loaded[i].k == queries[i].k);
  }

  SUBCASE("unknown keywords map past the vocabulary") {
    std::istringstream odd(
        R"({"x": 0, "y": 0, "kw": ["ghost", "cafe", "GHOST", "wraith"], "k": 2})"
        "\n");
    const std::vector<Query> qs = parseWorkload(odd, "wl", c.vocab);
    REQUIRE(qs.size() == 1);
    const WordId cafe = *c.vocab.find("cafe");
    const auto vocabEnd = static_cast<WordId>(c.vocab.size());
    // ghost and wraith get distinct fresh ids; GHOST folds into ghost.
    REQUIRE(qs[0].keywords.size() == 3);
    CHECK(std::count(qs[0].keywords.begin(), qs[0].keywords.end(), cafe) ==
          1);
    CHECK(std::count(qs[0].keywords.begin(), qs[0].keywords.end(),
                     vocabEnd) == 1);
    CHECK(std::count(qs[0].keywords.begin(), qs[0].keywords.end(),
                     vocabEnd + 1) == 1);
  }

  SUBCASE("workload parse failures name the line") {
    const auto fails = [&](const std::string& text2, int line) {
      std::istringstream bad(text2);
      try {
        parseWorkload(bad, "wl", c.vocab);
        FAIL("expected a parse failure");
      } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(
                  "wl:" + std::to_string(line) + ":") != std::string::npos);
      }
    };
    fails(R"({"x": 0, "y": 0, "kw": ["cafe"], "k": 0})" "\n", 1);
    fails(R"({"x": 0, "y": 0, "kw": ["cafe"]})" "\n", 1);
    fails(R"({"x": 0, "y": 0, "kw": [], "k": 1})" "\n", 1);
    const std::string good =
        R"({"x": 0, "y": 0, "kw": ["cafe"], "k": 1})";
    fails(good + "\n" + R"({"x": "west", "y": 0, "kw": ["cafe"], "k": 1})"
                          "\n",
          2);
  }
}
