// Command line front end: corpus generation, index builds, single queries,
// benchmarking, self-validation, and cost estimation.
//
// Exit codes: 0 success, 1 usage error, 2 data/runtime error, 3 validation
// or benchmark-consistency failure.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "tksk/baselines.hpp"
#include "tksk/bck_index.hpp"
#include "tksk/costmodel.hpp"
#include "tksk/engine.hpp"
#include "tksk/ingest.hpp"
#include "tksk/match.hpp"
#include "tksk/model.hpp"

namespace {

using namespace tksk;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitError = 2;
constexpr int kExitValidation = 3;

std::string lowercased(std::string s) {
  for (char& c : s)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

WordPolicy policyFromName(const std::string& name) {
  if (name == "plain") return WordPolicy::kPlain;
  if (name == "prefix") return WordPolicy::kPrefix;
  return WordPolicy::kNeighborUnion;
}

const char* policyName(WordPolicy policy) {
  switch (policy) {
    case WordPolicy::kPlain:
      return "plain";
    case WordPolicy::kPrefix:
      return "prefix";
    default:
      return "neighbor";
  }
}

// FNV-1a over the result tuples; identical answers (including witnesses and
// distance bits) hash identically on every platform.
std::uint64_t answerDigest(const TopKAnswer& answer) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto feed = [&h](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const MatchResult& r : answer.results) {
    feed(r.trajId, 4);
    feed(r.s, 4);
    feed(r.e, 4);
    std::uint64_t bits = 0;
    static_assert(sizeof(bits) == sizeof(r.distance));
    std::memcpy(&bits, &r.distance, sizeof bits);
    feed(bits, 8);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Shared algorithm dispatch (query and bench).
// ---------------------------------------------------------------------------

struct RunStats {
  std::uint64_t candidates = 0;
  std::uint64_t matchCalls = 0;
  std::uint64_t postings = 0;  // engine: (word, cell) postings scanned
  std::uint64_t nodes = 0;     // tree baselines: nodes expanded
  std::uint64_t rounds = 0;    // engine: expansion rounds
};

const std::vector<std::string> kAllAlgorithms = {"ie", "ie-ring", "if",
                                                 "rt",  "irt",    "brute"};

// Lazily prepared baseline structures over a materialized corpus.
struct AlgorithmKit {
  const BckIndex& index;
  const std::vector<Trajectory>& corpus;
  std::optional<InvertedFile> inverted;
  std::optional<RTree> rtree;
  std::optional<IRTree> irtree;

  AlgorithmKit(const BckIndex& ix, const std::vector<Trajectory>& c)
      : index(ix), corpus(c) {}

  void prepare(const std::string& algo) {
    if (algo == "if" && !inverted) inverted = InvertedFile::build(corpus);
    if (algo == "rt" && !rtree) {
      std::vector<TrajectoryMBR> mbrs;
      mbrs.reserve(corpus.size());
      for (const Trajectory& t : corpus) mbrs.push_back(trajectoryMBR(t));
      rtree = RTree::build(mbrs);
    }
    if (algo == "irt" && !irtree) irtree = IRTree::build(corpus);
  }

  TopKAnswer run(const std::string& algo, const Query& q, RunStats& stats) {
    if (algo == "ie" || algo == "ie-ring") {
      QueryCounters counters;
      TopKAnswer answer = topK(q, index,
                               algo == "ie" ? ExpansionMode::kCumulative
                                            : ExpansionMode::kRing,
                               &counters);
      stats.candidates = counters.candidates;
      stats.matchCalls = counters.matchCalls;
      stats.postings = counters.postingCells;
      stats.rounds = counters.rounds;
      return answer;
    }
    BaselineCounters counters;
    TopKAnswer answer;
    if (algo == "brute") {
      answer = bruteForceTopK(q, corpus, &counters);
    } else if (algo == "if") {
      answer = ifTopK(q, *inverted, corpus, &counters);
    } else if (algo == "rt") {
      answer = rtTopK(q, *rtree, corpus, &counters);
    } else if (algo == "irt") {
      answer = irtTopK(q, *irtree, corpus, &counters);
    } else {
      throw std::invalid_argument("unknown algorithm: " + algo);
    }
    stats.candidates = counters.candidates;
    stats.matchCalls = counters.matchCalls;
    stats.nodes = counters.nodesVisited;
    return answer;
  }
};

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

struct GenerateOpts {
  std::string out;
  std::uint32_t trajectories = 1000;
  std::uint32_t places = 10;
  std::uint32_t vocab = 100;
  double clustering = 0.5;
  std::uint64_t seed = 0;
  double extent = 1000.0;
  double meanStep = 10.0;
  double zipf = 1.0;
  std::uint32_t maxKw = 4;
  std::string workloadOut;
  std::uint32_t queries = 0;
  std::uint32_t kwPerQuery = 2;
  std::uint32_t k = 10;
  double radius = 0.0;
  std::optional<std::uint64_t> workloadSeed;
};

int runGenerate(const GenerateOpts& o) {
  CorpusSpec spec;
  spec.trajectoryCount = o.trajectories;
  spec.placesPerTrajectory = o.places;
  spec.vocabSize = o.vocab;
  spec.clustering = o.clustering;
  spec.seed = o.seed;
  spec.extent = o.extent;
  spec.meanStep = o.meanStep;
  spec.zipfExponent = o.zipf;
  spec.maxKeywordsPerPlace = o.maxKw;

  const std::vector<Trajectory> corpus = generateCorpus(spec);
  Vocabulary vocab;
  vocab.ensureIds(spec.vocabSize);
  saveCorpus(o.out, corpus, vocab);

  std::uint64_t placeCount = 0;
  for (const Trajectory& t : corpus) placeCount += t.size();
  std::printf("wrote %zu trajectories (%llu places, vocabulary %zu) to %s\n",
              corpus.size(), static_cast<unsigned long long>(placeCount),
              vocab.size(), o.out.c_str());

  if (!o.workloadOut.empty()) {
    WorkloadSpec ws;
    ws.queryCount = o.queries;
    ws.keywordsPerQuery = o.kwPerQuery;
    ws.k = o.k;
    ws.seed = o.workloadSeed.value_or(o.seed + 1);
    ws.locationRadius = o.radius;
    const std::vector<Query> workload = generateQueries(corpus, ws);
    saveWorkload(o.workloadOut, workload, vocab);
    std::printf("wrote %zu queries to %s\n", workload.size(),
                o.workloadOut.c_str());
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

struct BuildOpts {
  std::string input;
  std::string out;
  std::uint32_t segmentLimit = 800;
  std::uint32_t maxLevel = 12;
  std::string policy = "neighbor";
};

int runBuild(const BuildOpts& o) {
  LoadedCorpus corpus = loadCorpus(o.input);
  BuildOptions options;
  options.segmentLimit = o.segmentLimit;
  options.maxLevel = o.maxLevel;
  options.policy = policyFromName(o.policy);

  const BckIndex index =
      BckIndex::build(corpus.trajectories, std::move(corpus.vocab),
                      std::move(corpus.externalIds), options);
  index.save(o.out);

  const IndexStats& st = index.stats();
  std::printf("trajectories    %u\n", st.trajectoryCount);
  std::printf("places          %llu\n",
              static_cast<unsigned long long>(st.placeCount));
  std::printf("keyword slots   %llu\n",
              static_cast<unsigned long long>(st.keywordSlotCount));
  std::printf("vocabulary      %zu\n", index.vocab().size());
  std::printf("grid leaves     %zu\n", index.grid().leaves().size());
  std::printf("deepest level   %u\n", index.grid().deepestLevel());
  std::printf("smallest side   %.6f\n", index.grid().smallestLeafSide());
  std::printf("word-cell keys  %zu\n", index.component1().entries().size());
  std::printf("traj-word keys  %zu\n", index.component2().entries().size());
  std::printf("word policy     %s\n", policyName(index.policy()));
  std::printf("index written to %s\n", o.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// query
// ---------------------------------------------------------------------------

struct QueryOpts {
  std::string index;
  double x = 0.0;
  double y = 0.0;
  std::vector<std::string> keywords;
  std::uint32_t k = 10;
  std::string algo = "ie";
};

int runQuery(const QueryOpts& o) {
  const BckIndex index = BckIndex::load(o.index);

  std::vector<WordId> words;
  words.reserve(o.keywords.size());
  for (const std::string& raw : o.keywords) {
    const std::optional<WordId> id = index.vocab().find(lowercased(raw));
    if (!id) return kExitOk;  // a word nothing carries: provably no results
    words.push_back(*id);
  }

  const Query q = makeQuery({o.x, o.y}, std::move(words), o.k);

  std::vector<Trajectory> corpus;
  if (o.algo != "ie" && o.algo != "ie-ring")
    corpus = materializeTrajectories(index);
  AlgorithmKit kit(index, corpus);
  kit.prepare(o.algo);
  RunStats stats;
  const TopKAnswer answer = kit.run(o.algo, q, stats);

  for (std::size_t i = 0; i < answer.results.size(); ++i) {
    const MatchResult& r = answer.results[i];
    std::printf("%zu %s %u %u %.6f\n", i + 1,
                index.externalId(r.trajId).c_str(), r.s, r.e, r.distance);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchOpts {
  std::string index;
  std::string workload;
  std::vector<std::string> algos = {"ie", "if", "rt", "irt", "brute"};
  std::uint32_t repeat = 3;
};

struct BenchRow {
  std::string algo;
  std::size_t query = 0;
  std::vector<double> ms;
  RunStats stats;
  std::size_t results = 0;
  std::uint64_t digest = 0;
};

double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double scaled = p * static_cast<double>(values.size());
  std::size_t rank = static_cast<std::size_t>(std::ceil(scaled));
  if (rank == 0) rank = 1;
  return values[std::min(values.size(), rank) - 1];
}

int runBench(const BenchOpts& o) {
  const BckIndex index = BckIndex::load(o.index);
  const std::vector<Query> queries = loadWorkload(o.workload, index.vocab());
  const std::vector<Trajectory> corpus = materializeTrajectories(index);

  AlgorithmKit kit(index, corpus);
  for (const std::string& algo : o.algos) kit.prepare(algo);

  using Clock = std::chrono::steady_clock;
  std::vector<BenchRow> rows;
  rows.reserve(queries.size() * o.algos.size());

  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Query& q = queries[qi];
    const std::size_t first = rows.size();
    for (const std::string& algo : o.algos) {
      BenchRow row;
      row.algo = algo;
      row.query = qi;
      TopKAnswer answer;
      for (std::uint32_t rep = 0; rep < o.repeat; ++rep) {
        RunStats stats;
        const auto t0 = Clock::now();
        TopKAnswer a = kit.run(algo, q, stats);
        const auto t1 = Clock::now();
        row.ms.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
        if (rep + 1 == o.repeat) {
          answer = std::move(a);
          row.stats = stats;
        }
      }
      row.results = answer.results.size();
      row.digest = answerDigest(answer);
      rows.push_back(std::move(row));
    }

    // Every algorithm must produce the identical answer; the ring expansion
    // mode is exempt (reported for curiosity, not trusted for correctness).
    const BenchRow* reference = nullptr;
    for (std::size_t i = first; i < rows.size(); ++i) {
      if (rows[i].algo == "ie-ring") continue;
      if (!reference) {
        reference = &rows[i];
      } else if (rows[i].digest != reference->digest) {
        std::fprintf(stderr, "answer digests disagree on query %zu:\n", qi);
        for (std::size_t j = first; j < rows.size(); ++j)
          std::fprintf(stderr, "  %-8s digest %016llx (%zu results)%s\n",
                       rows[j].algo.c_str(),
                       static_cast<unsigned long long>(rows[j].digest),
                       rows[j].results,
                       rows[j].algo == "ie-ring" ? " [exempt]" : "");
        return kExitValidation;
      }
    }
  }

  // One machine-readable object per (algorithm, query).
  for (const BenchRow& row : rows) {
    double sum = 0.0;
    std::string samples;
    for (std::size_t i = 0; i < row.ms.size(); ++i) {
      sum += row.ms[i];
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%.6f", i ? "," : "", row.ms[i]);
      samples += buf;
    }
    const double mean = row.ms.empty() ? 0.0 : sum / row.ms.size();
    std::printf(
        "{\"algo\":\"%s\",\"query\":%zu,\"results\":%zu,"
        "\"digest\":\"%016llx\",\"meanMs\":%.6f,\"ms\":[%s],"
        "\"candidates\":%llu,\"matchCalls\":%llu,\"postings\":%llu,"
        "\"nodes\":%llu,\"rounds\":%llu}\n",
        row.algo.c_str(), row.query, row.results,
        static_cast<unsigned long long>(row.digest), mean, samples.c_str(),
        static_cast<unsigned long long>(row.stats.candidates),
        static_cast<unsigned long long>(row.stats.matchCalls),
        static_cast<unsigned long long>(row.stats.postings),
        static_cast<unsigned long long>(row.stats.nodes),
        static_cast<unsigned long long>(row.stats.rounds));
  }

  // Aggregate table: per-query mean latencies summarized per algorithm.
  std::printf("\n%-8s %8s %10s %10s %10s %12s %12s %12s %10s\n", "algo",
              "queries", "mean-ms", "median-ms", "p95-ms", "candidates",
              "match-calls", "postings", "nodes");
  for (const std::string& algo : o.algos) {
    std::vector<double> perQuery;
    RunStats totals;
    for (const BenchRow& row : rows) {
      if (row.algo != algo) continue;
      double sum = 0.0;
      for (double v : row.ms) sum += v;
      perQuery.push_back(row.ms.empty() ? 0.0 : sum / row.ms.size());
      totals.candidates += row.stats.candidates;
      totals.matchCalls += row.stats.matchCalls;
      totals.postings += row.stats.postings;
      totals.nodes += row.stats.nodes;
    }
    double mean = 0.0;
    for (double v : perQuery) mean += v;
    if (!perQuery.empty()) mean /= static_cast<double>(perQuery.size());
    std::printf("%-8s %8zu %10.4f %10.4f %10.4f %12llu %12llu %12llu %10llu\n",
                algo.c_str(), perQuery.size(), mean,
                percentile(perQuery, 0.50), percentile(perQuery, 0.95),
                static_cast<unsigned long long>(totals.candidates),
                static_cast<unsigned long long>(totals.matchCalls),
                static_cast<unsigned long long>(totals.postings),
                static_cast<unsigned long long>(totals.nodes));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidateOpts {
  std::uint32_t n = 20;
  std::uint64_t seed = 0;
  bool injectFault = false;
};

struct ValidationFailure {
  std::string check;
  std::string detail;
};

using CheckResult = std::optional<ValidationFailure>;
using CheckFn =
    std::function<CheckResult(const std::vector<Trajectory>&, const Query&)>;

double witnessDistance(const Query& q, const Trajectory& t, PlaceIndex s,
                       PlaceIndex e) {
  double path = 0.0;
  for (PlaceIndex i = s; i < e; ++i)
    path += dist(t.place(i).location(), t.place(i + 1).location());
  return std::min(dist(q.location, t.place(s).location()),
                  dist(q.location, t.place(e).location())) +
         path;
}

// Rebuilds the first trajectory with its first place displaced; the index
// built from the result disagrees with the pristine corpus it claims to
// represent, which the checks must notice.
std::vector<Trajectory> withDisplacedPlace(std::vector<Trajectory> corpus,
                                           double shift) {
  if (corpus.empty() || corpus.front().size() == 0) return corpus;
  std::vector<Place> places = corpus.front().places();
  const Place& victim = places.front();
  places.front() =
      Place({victim.x() + shift, victim.y() + shift}, victim.keywords());
  corpus.front() = Trajectory(corpus.front().id(), std::move(places));
  return corpus;
}

CheckResult checkKernel(const std::vector<Trajectory>& corpus,
                        const Query& q) {
  for (const Trajectory& t : corpus) {
    const MatchResult naive = naiveMinMatchDist(q, t);
    const MatchResult fast = matchMinDist(q, t, kNoMatch);
    if (naive.distance != fast.distance)
      return ValidationFailure{
          "kernel-vs-scan",
          "distance diverges on trajectory " + std::to_string(t.id())};
    if (fast.matched()) {
      const auto windows = enumerateMinimumMatches(q, t);
      if (std::find(windows.begin(), windows.end(),
                    std::make_pair(fast.s, fast.e)) == windows.end())
        return ValidationFailure{
            "kernel-vs-scan", "witness is not a minimum match on trajectory " +
                                  std::to_string(t.id())};
      const double restated = witnessDistance(q, t, fast.s, fast.e);
      if (std::abs(restated - fast.distance) >
          1e-9 * std::max(1.0, fast.distance))
        return ValidationFailure{
            "kernel-vs-scan", "witness distance restates differently on " +
                                  std::to_string(t.id())};
    }
  }
  return std::nullopt;
}

CheckResult checkTopK(const std::vector<Trajectory>& corpus,
                      const BckIndex& index, const Query& q) {
  const TopKAnswer got = topK(q, index);
  const TopKAnswer want = bruteForceTopK(q, corpus);
  if (got.results.size() != want.results.size())
    return ValidationFailure{"engine-vs-scan",
                             "result count " +
                                 std::to_string(got.results.size()) + " vs " +
                                 std::to_string(want.results.size())};
  for (std::size_t i = 0; i < got.results.size(); ++i) {
    const MatchResult& a = got.results[i];
    const MatchResult& b = want.results[i];
    if (a.trajId != b.trajId || a.s != b.s || a.e != b.e ||
        a.distance != b.distance)
      return ValidationFailure{"engine-vs-scan",
                               "rank " + std::to_string(i + 1) + " differs"};
  }
  return std::nullopt;
}

CheckResult checkGrid(const std::vector<Trajectory>& built,
                      const BckIndex& index) {
  const Grid& g = index.grid();
  const auto& leaves = g.leaves();
  if (leaves.empty()) return ValidationFailure{"grid-shape", "no leaves"};
  CellCode next = 0;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    if (leaves[i].code != next)
      return ValidationFailure{
          "grid-shape", "leaf codes not contiguous at " + std::to_string(i)};
    if (leaves[i].level > g.maxLevel())
      return ValidationFailure{
          "grid-shape", "leaf deeper than the level cap at " +
                            std::to_string(i)};
    next += g.spanAtLevel(leaves[i].level);
  }
  if (next != g.spanAtLevel(0))
    return ValidationFailure{"grid-shape", "leaves do not tile the root"};
  std::vector<std::uint64_t> counts(leaves.size(), 0);
  for (const Trajectory& t : built)
    for (const Place& p : t.places()) ++counts[g.leafIndexAt(p.location())];
  for (std::size_t i = 0; i < leaves.size(); ++i)
    if (counts[i] != leaves[i].load)
      return ValidationFailure{
          "grid-shape", "leaf load drifts at " + std::to_string(i)};
  return std::nullopt;
}

CheckResult checkCostModel(const BckIndex& index, const Query& q) {
  CostParams params;
  try {
    params = paramsFromIndex(index, q);
  } catch (const std::invalid_argument&) {
    return std::nullopt;  // model inapplicable to this index/query pair
  }
  const double h1 = prHat1(params);
  for (std::uint32_t i = 1; i <= 10; ++i) {
    const double closed = 1.0 - std::pow(1.0 - h1, static_cast<double>(i));
    if (std::abs(p1(i, params) - closed) > 1e-12)
      return ValidationFailure{
          "cost-model",
          "single-cover sum breaks its closed form at i=" + std::to_string(i)};
  }
  double sum = 0.0;
  for (std::uint32_t i = 1; i + 1 <= params.maxPlaces; ++i) {
    const double v = prHatI(i, params);
    if (!(v >= 0.0 && v <= 1.0))
      return ValidationFailure{
          "cost-model", "minimal-cover probability escapes [0, 1] at i=" +
                            std::to_string(i)};
    sum += v;
  }
  if (sum > 1.0 + 1e-9)
    return ValidationFailure{"cost-model",
                             "minimal-cover probabilities sum beyond one"};
  const CostEstimate est = expectedEstimate(params);
  if (!(std::isfinite(est.expectedPlaces) && est.expectedPlaces >= 0.0) ||
      !(std::isfinite(est.estDistance) && est.estDistance >= 0.0))
    return ValidationFailure{"cost-model",
                             "estimate is not finite and non-negative"};
  return std::nullopt;
}

// Greedy shrink: drop trajectories, then places, then query keywords, as
// long as the failing predicate keeps failing.
void minimizeReproducer(std::vector<Trajectory>& corpus, Query& query,
                        const CheckFn& fails) {
  const auto reId = [](std::vector<Trajectory> ts) {
    std::vector<Trajectory> out;
    out.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i)
      out.emplace_back(static_cast<TrajId>(i), ts[i].places());
    return out;
  };
  int budget = 400;
  bool progress = true;
  while (progress && budget > 0) {
    progress = false;
    for (std::size_t t = 0; corpus.size() > 1 && t < corpus.size(); ++t) {
      std::vector<Trajectory> candidate = corpus;
      candidate.erase(candidate.begin() + static_cast<std::ptrdiff_t>(t));
      candidate = reId(std::move(candidate));
      if (--budget <= 0) return;
      if (fails(candidate, query)) {
        corpus = std::move(candidate);
        progress = true;
        break;
      }
    }
    if (progress) continue;
    for (std::size_t t = 0; !progress && t < corpus.size(); ++t) {
      for (std::size_t p = 0; corpus[t].size() > 1 && p < corpus[t].size();
           ++p) {
        std::vector<Trajectory> candidate = corpus;
        std::vector<Place> places = candidate[t].places();
        places.erase(places.begin() + static_cast<std::ptrdiff_t>(p));
        candidate[t] = Trajectory(candidate[t].id(), std::move(places));
        if (--budget <= 0) return;
        if (fails(candidate, query)) {
          corpus = std::move(candidate);
          progress = true;
          break;
        }
      }
    }
    if (progress) continue;
    for (std::size_t w = 0;
         query.keywords.size() > 1 && w < query.keywords.size(); ++w) {
      Query candidate = query;
      candidate.keywords.erase(candidate.keywords.begin() +
                               static_cast<std::ptrdiff_t>(w));
      if (--budget <= 0) return;
      if (fails(corpus, candidate)) {
        query = std::move(candidate);
        progress = true;
        break;
      }
    }
  }
}

void reportValidationFailure(std::uint32_t instance,
                             const ValidationFailure& failure,
                             std::vector<Trajectory> corpus, Query query,
                             const Vocabulary& vocab, const CheckFn& fails) {
  minimizeReproducer(corpus, query, fails);
  std::fprintf(stderr, "validation failure in instance %u: %s (%s)\n",
               instance, failure.check.c_str(), failure.detail.c_str());
  std::size_t placeCount = 0;
  for (const Trajectory& t : corpus) placeCount += t.size();
  std::fprintf(stderr,
               "minimized reproducer: %zu trajectories, %zu places, "
               "%zu query keywords\n",
               corpus.size(), placeCount, query.keywords.size());
  std::ostringstream corpusText;
  writeCorpus(corpusText, corpus, vocab);
  std::ostringstream queryText;
  writeWorkload(queryText, std::span<const Query>(&query, 1), vocab);
  std::fprintf(stderr, "--- corpus ---\n%s--- query ---\n%s",
               corpusText.str().c_str(), queryText.str().c_str());
}

int runValidate(const ValidateOpts& o) {
  for (std::uint32_t inst = 0; inst < o.n; ++inst) {
    const std::uint64_t instSeed =
        o.seed ^ (0x9E3779B97F4A7C15ULL * (inst + 1));
    CorpusSpec cs;
    cs.trajectoryCount = 4 + inst % 11;
    cs.placesPerTrajectory = 2 + (inst * 7) % 6;
    cs.vocabSize = 12;
    cs.clustering = 0.45 * static_cast<double>(inst % 3);
    cs.seed = instSeed;
    cs.extent = 60.0;
    cs.meanStep = 4.0;
    cs.zipfExponent = 1.0;
    cs.maxKeywordsPerPlace = 3;
    const std::vector<Trajectory> corpus = generateCorpus(cs);
    Vocabulary vocab;
    vocab.ensureIds(cs.vocabSize);

    WorkloadSpec ws;
    ws.queryCount = 3;
    ws.keywordsPerQuery = 1 + inst % 3;
    ws.k = 1 + inst % 5;
    ws.seed = instSeed + 1;
    ws.locationRadius = 10.0;
    std::vector<Query> queries;
    try {
      queries = generateQueries(corpus, ws);
    } catch (const std::runtime_error&) {
      ws.keywordsPerQuery = 1;  // tiny unions: fall back to single keywords
      queries = generateQueries(corpus, ws);
    }

    // A probe anchored on the first place of the first trajectory: its
    // distance is exactly zero with witness (1, 1), so any index that
    // misplaces that place is caught deterministically.
    const Place& anchor = corpus.front().place(1);
    queries.push_back(makeQuery(anchor.location(), anchor.keywords(),
                                static_cast<std::uint32_t>(corpus.size())));

    const double shift = o.injectFault ? 3.0 * cs.extent : 0.0;
    const auto buildFor = [&vocab, shift](const std::vector<Trajectory>& ts) {
      BuildOptions options;
      options.segmentLimit = 6;  // small cap: force real grid splits
      options.maxLevel = 8;
      std::vector<Trajectory> built =
          shift != 0.0 ? withDisplacedPlace(ts, shift) : ts;
      Vocabulary v = vocab;
      BckIndex index = BckIndex::build(built, std::move(v), {}, options);
      return std::make_pair(std::move(index), std::move(built));
    };

    const CheckFn kernelCheck = [](const std::vector<Trajectory>& c,
                                   const Query& q) {
      return checkKernel(c, q);
    };
    const CheckFn topkCheck = [&buildFor](const std::vector<Trajectory>& c,
                                          const Query& q) {
      const auto [index, built] = buildFor(c);
      return checkTopK(c, index, q);
    };
    const CheckFn gridCheck = [&buildFor](const std::vector<Trajectory>& c,
                                          const Query&) {
      const auto [index, built] = buildFor(c);
      return checkGrid(built, index);
    };
    const CheckFn costCheck = [&buildFor](const std::vector<Trajectory>& c,
                                          const Query& q) {
      const auto [index, built] = buildFor(c);
      return checkCostModel(index, q);
    };

    for (const Query& q : queries) {
      for (const auto& [name, check] :
           {std::pair<const char*, const CheckFn*>{"kernel", &kernelCheck},
            {"engine", &topkCheck}}) {
        (void)name;
        if (CheckResult r = (*check)(corpus, q)) {
          reportValidationFailure(inst, *r, corpus, q, vocab, *check);
          return kExitValidation;
        }
      }
    }
    if (CheckResult r = gridCheck(corpus, queries.front())) {
      reportValidationFailure(inst, *r, corpus, queries.front(), vocab,
                              gridCheck);
      return kExitValidation;
    }
    if (CheckResult r = costCheck(corpus, queries.back())) {
      reportValidationFailure(inst, *r, corpus, queries.back(), vocab,
                              costCheck);
      return kExitValidation;
    }
  }
  std::printf("validated %u instances: all checks passed\n", o.n);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateOpts {
  std::string index;
  std::string workload;
};

int runEstimate(const EstimateOpts& o) {
  const BckIndex index = BckIndex::load(o.index);
  const std::vector<Query> queries = loadWorkload(o.workload, index.vocab());

  std::printf("%-6s %15s %14s %14s %9s %9s %8s\n", "query", "expected-places",
              "est-distance", "top1-distance", "overlap", "enclosed", "ratio");
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const Query& q = queries[qi];
    Query single = q;
    single.k = 1;
    const TopKAnswer answer = topK(single, index);

    std::optional<CostEstimate> est;
    try {
      est = expectedEstimate(paramsFromIndex(index, q));
    } catch (const std::invalid_argument&) {
      // more query words than the vocabulary holds: the model says nothing
    }

    char places[32] = "-";
    char estDist[32] = "-";
    char overlap[32] = "-";
    char enclosed[32] = "-";
    if (est) {
      std::snprintf(places, sizeof places, "%.4f", est->expectedPlaces);
      std::snprintf(estDist, sizeof estDist, "%.6f", est->estDistance);
      const double d = est->estDistance;
      const BoundingBox window{q.location.x - d, q.location.y - d,
                               q.location.x + d, q.location.y + d};
      const QuadCount quads = windowQuadCount(index.grid(), window);
      std::snprintf(overlap, sizeof overlap, "%llu",
                    static_cast<unsigned long long>(quads.overlapping));
      std::snprintf(enclosed, sizeof enclosed, "%llu",
                    static_cast<unsigned long long>(quads.enclosed));
    }
    char empirical[32] = "no-match";
    char ratio[32] = "-";
    if (!answer.results.empty()) {
      const double observed = answer.results.front().distance;
      std::snprintf(empirical, sizeof empirical, "%.6f", observed);
      if (est && observed > 0.0)
        std::snprintf(ratio, sizeof ratio, "%.3f",
                      est->estDistance / observed);
    }
    std::printf("%-6zu %15s %14s %14s %9s %9s %8s\n", qi, places, estDist,
                empirical, overlap, enclosed, ratio);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"top-k spatial-keyword search over trajectories"};
  app.require_subcommand(1);
  int rc = kExitOk;

  GenerateOpts gen;
  CLI::App* generate =
      app.add_subcommand("generate", "synthesize a corpus and workload");
  generate->add_option("--out", gen.out, "corpus output path (JSON lines)")
      ->required();
  generate->add_option("--trajectories", gen.trajectories,
                       "number of trajectories");
  generate->add_option("--places", gen.places, "places per trajectory");
  generate->add_option("--vocab", gen.vocab, "vocabulary size");
  generate->add_option("--clustering", gen.clustering,
                       "share of walks starting near a hotspot")
      ->check(CLI::Range(0.0, 1.0));
  generate->add_option("--seed", gen.seed, "corpus seed");
  generate->add_option("--extent", gen.extent, "side of the square space");
  generate->add_option("--mean-step", gen.meanStep, "mean walk step length");
  generate->add_option("--zipf", gen.zipf, "keyword rank exponent");
  generate->add_option("--max-kw", gen.maxKw, "max keywords per place");
  generate->add_option("--workload-out", gen.workloadOut,
                       "query workload output path");
  generate->add_option("--queries", gen.queries, "number of queries");
  generate->add_option("--kw-per-query", gen.kwPerQuery,
                       "keywords per query");
  generate->add_option("--k", gen.k, "result count per query");
  generate->add_option("--radius", gen.radius,
                       "query locations may leave the data box this far");
  generate->add_option("--workload-seed", gen.workloadSeed,
                       "workload seed (defaults to --seed + 1)");
  generate->callback([&] {
    if (gen.queries > 0 && gen.workloadOut.empty())
      throw CLI::ValidationError(
          "generate", "--workload-out is required when --queries > 0");
    rc = runGenerate(gen);
  });

  BuildOpts bld;
  CLI::App* build =
      app.add_subcommand("build", "build an index from a corpus file");
  build->add_option("--input", bld.input, "corpus path (JSON lines)")
      ->required();
  build->add_option("--out", bld.out, "index snapshot output path")
      ->required();
  build->add_option("--segments-per-cell", bld.segmentLimit,
                    "max places per grid cell before a split")
      ->check(CLI::Range(1u, 1u << 30));
  build->add_option("--max-level", bld.maxLevel, "grid refinement cap")
      ->check(CLI::Range(0u, 31u));
  build->add_option("--word-policy", bld.policy,
                    "fragment word association policy")
      ->check(CLI::IsMember({"plain", "neighbor", "prefix"}));
  build->callback([&] { rc = runBuild(bld); });

  QueryOpts qry;
  CLI::App* query = app.add_subcommand("query", "run one top-k query");
  query->add_option("--index", qry.index, "index snapshot path")->required();
  query->add_option("--x", qry.x, "query x coordinate")->required();
  query->add_option("--y", qry.y, "query y coordinate")->required();
  query->add_option("--kw", qry.keywords, "query keywords, comma separated")
      ->required()
      ->delimiter(',');
  query->add_option("--k", qry.k, "result count")
      ->check(CLI::Range(1u, 1000000000u));
  query->add_option("--algo", qry.algo, "algorithm")
      ->check(CLI::IsMember(kAllAlgorithms));
  query->callback([&] { rc = runQuery(qry); });

  BenchOpts ben;
  CLI::App* bench =
      app.add_subcommand("bench", "time algorithms over a workload");
  bench->add_option("--index", ben.index, "index snapshot path")->required();
  bench->add_option("--workload", ben.workload, "query workload path")
      ->required();
  bench->add_option("--algos", ben.algos, "algorithms, comma separated")
      ->delimiter(',')
      ->check(CLI::IsMember(kAllAlgorithms));
  bench->add_option("--repeat", ben.repeat, "runs per (algorithm, query)")
      ->check(CLI::Range(1u, 1000u));
  bench->callback([&] { rc = runBench(ben); });

  ValidateOpts val;
  CLI::App* validate = app.add_subcommand(
      "validate", "cross-check the engine on generated instances");
  validate->add_option("--n", val.n, "number of generated instances");
  validate->add_option("--seed", val.seed, "base seed");
  validate
      ->add_flag("--inject-fault", val.injectFault,
                 "corrupt each instance's index to prove the checks bite")
      ->group("");  // hidden: a self-test hook, not a user knob
  validate->callback([&] { rc = runValidate(val); });

  EstimateOpts est;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "compare cost-model predictions against observed queries");
  estimate->add_option("--index", est.index, "index snapshot path")
      ->required();
  estimate->add_option("--workload", est.workload, "query workload path")
      ->required();
  estimate->callback([&] { rc = runEstimate(est); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return rc;
}
