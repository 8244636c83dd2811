#ifndef TKSK_INGEST_HPP
#define TKSK_INGEST_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tksk/bck_index.hpp"
#include "tksk/model.hpp"

namespace tksk {

// ---------------------------------------------------------------------------
// Corpus files: one trajectory object per line,
//   {"id": "<name>", "places": [{"x": 1.5, "y": 2.0, "kw": ["cafe"]}, ...]}
// Keyword strings are lowercased and deduplicated per place; word ids are
// assigned in first-seen order. Errors name the offending line.
// ---------------------------------------------------------------------------

struct LoadedCorpus {
  std::vector<Trajectory> trajectories;  // dense ids in file order
  Vocabulary vocab;
  std::vector<std::string> externalIds;  // parallel to trajectories
};

// Throws std::runtime_error for unreadable files, malformed lines,
// duplicate trajectory ids, and non-finite coordinates.
LoadedCorpus loadCorpus(const std::string& path);
LoadedCorpus parseCorpus(std::istream& in, const std::string& name);

// Inverse of loadCorpus; external ids default to the decimal dense id.
void saveCorpus(const std::string& path,
                std::span<const Trajectory> trajectories,
                const Vocabulary& vocab,
                std::span<const std::string> externalIds = {});
void writeCorpus(std::ostream& out, std::span<const Trajectory> trajectories,
                 const Vocabulary& vocab,
                 std::span<const std::string> externalIds = {});

// ---------------------------------------------------------------------------
// Synthetic corpora: random walks carrying Zipf-distributed keywords.
// ---------------------------------------------------------------------------

struct CorpusSpec {
  std::uint32_t trajectoryCount = 0;
  std::uint32_t placesPerTrajectory = 10;
  std::uint32_t vocabSize = 100;
  // 0 starts every walk uniformly in the space; 1 starts every walk near
  // one of a handful of hotspots; values between interpolate the mix.
  double clustering = 0.0;
  std::uint64_t seed = 0;
  double extent = 1000.0;   // side of the square space
  double meanStep = 10.0;   // walk steps draw from [0.5, 1.5] x this
  double zipfExponent = 1.0;
  std::uint32_t maxKeywordsPerPlace = 4;  // counts draw uniformly from 1..max
};

// Deterministic for a given spec. Word ids are Zipf ranks: id 0 is the most
// frequent word. Throws std::invalid_argument on out-of-range parameters.
std::vector<Trajectory> generateCorpus(const CorpusSpec& spec);

// Normalized rank probabilities the keyword sampler draws from:
// rank r (0-based) has weight (r+1)^-exponent.
std::vector<double> zipfProbabilities(std::uint32_t vocabSize,
                                      double exponent);

// ---------------------------------------------------------------------------
// Query workloads.
// ---------------------------------------------------------------------------

struct WorkloadSpec {
  std::uint32_t queryCount = 0;
  std::uint32_t keywordsPerQuery = 2;
  std::uint32_t k = 10;
  std::uint64_t seed = 0;
  // The query location draws uniformly from the source trajectory's
  // bounding box expanded by this margin on every side.
  double locationRadius = 0.0;
};

// Each query samples its keywords from one randomly chosen trajectory's
// keyword union, so a full scan always finds at least one match. Throws
// std::invalid_argument on bad parameters or an empty corpus, and
// std::runtime_error when no trajectory offers keywordsPerQuery distinct
// keywords.
std::vector<Query> generateQueries(std::span<const Trajectory> corpus,
                                   const WorkloadSpec& spec);

// Workload files: one query object per line,
//   {"x": 3.0, "y": 4.0, "kw": ["cafe", "park"], "k": 10}
// Keywords unknown to the vocabulary map to fresh ids past it, so they are
// well-formed but match nothing.
std::vector<Query> loadWorkload(const std::string& path,
                                const Vocabulary& vocab);
std::vector<Query> parseWorkload(std::istream& in, const std::string& name,
                                 const Vocabulary& vocab);
void saveWorkload(const std::string& path, std::span<const Query> queries,
                  const Vocabulary& vocab);
void writeWorkload(std::ostream& out, std::span<const Query> queries,
                   const Vocabulary& vocab);

}  // namespace tksk

#endif  // TKSK_INGEST_HPP
