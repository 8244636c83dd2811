#include "tksk/costmodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace tksk {
namespace {

// Probability outputs may stray outside [0,1] by floating-point noise; the
// recursion also goes genuinely negative where the model's combinatorial
// approximation overcounts, and a clamped zero is the lawful reading.
double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

double binom(std::uint32_t n, std::uint32_t k) {
  if (k > n) {
    return 0.0;
  }
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::uint32_t j = 1; j <= k; ++j) {
    r = r * static_cast<double>(n - k + j) / static_cast<double>(j);
  }
  return r;
}

void requirePositiveOrder(std::uint32_t i) {
  if (i == 0) {
    throw std::invalid_argument("place count i must be at least 1");
  }
}

// prHatI values for 1..maxI; index 0 is unused. The recursion at order i
// consumes every lower order through p2, so the whole prefix is built.
std::vector<double> prHatTable(std::uint32_t maxI, const CostParams& params) {
  std::vector<double> t(static_cast<std::size_t>(maxI) + 1, 0.0);
  const double h1 = prHat1(params);
  if (maxI >= 1) {
    t[1] = h1;
  }
  for (std::uint32_t i = 2; i <= maxI; ++i) {
    double v;
    if (i == 2) {
      v = prJoint(2, params) - 2.0 * h1 * (1.0 - h1) - h1 * h1;
    } else {
      double correction = 0.0;
      for (std::uint32_t j = 2; j + 1 <= i; ++j) {
        correction += (binom(i, j) - binom(i - 2, j - 2)) * t[j] *
                      (1.0 - prJoint(i - j, params));
      }
      v = prJoint(i, params) - p1(i, params) - correction;
    }
    t[i] = clamp01(v);
  }
  return t;
}

// Per-query-word probability that one place contains the word, under the
// model's independence idealization.
std::vector<double> presenceProbs(const CostParams& params) {
  std::vector<double> q;
  q.reserve(params.queryWordPr.size());
  for (double pr : params.queryWordPr) {
    q.push_back(1.0 - std::pow(1.0 - pr, params.avgWordsPerPlace));
  }
  return q;
}

using WordMask = std::uint64_t;

WordMask drawPlace(std::mt19937_64& rng, const std::vector<double>& presence) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  WordMask m = 0;
  for (std::size_t w = 0; w < presence.size(); ++w) {
    if (unit(rng) < presence[w]) {
      m |= WordMask{1} << w;
    }
  }
  return m;
}

// The union covers every word and each place holds a word no other place
// supplies — equivalently, no proper subset of the places still covers.
bool jointlyCovers(const std::vector<WordMask>& places, WordMask full) {
  WordMask all = 0;
  for (WordMask m : places) {
    all |= m;
  }
  if (all != full) {
    return false;
  }
  for (std::size_t p = 0; p < places.size(); ++p) {
    WordMask others = 0;
    for (std::size_t o = 0; o < places.size(); ++o) {
      if (o != p) {
        others |= places[o];
      }
    }
    if ((places[p] & ~others) == 0) {
      return false;
    }
  }
  return true;
}

McEstimate indicatorEstimate(std::uint64_t hits, std::uint64_t samples) {
  McEstimate e;
  e.samples = samples;
  e.mean = static_cast<double>(hits) / static_cast<double>(samples);
  e.sigma = std::sqrt(e.mean * (1.0 - e.mean) / static_cast<double>(samples));
  return e;
}

void requireSamples(std::uint64_t samples) {
  if (samples == 0) {
    throw std::invalid_argument("sample count must be positive");
  }
}

}  // namespace

void validateParams(const CostParams& params) {
  if (params.totalKeywords == 0) {
    throw std::invalid_argument("keyword universe must be non-empty");
  }
  if (params.maxPlaces == 0) {
    throw std::invalid_argument("maximum place count must be positive");
  }
  if (!(params.avgWordsPerPlace > 0.0)) {
    throw std::invalid_argument("mean keywords per place must be positive");
  }
  if (params.trajectoryCount == 0) {
    throw std::invalid_argument("trajectory count must be positive");
  }
  if (!(params.spaceSide > 0.0)) {
    throw std::invalid_argument("space side must be positive");
  }
  if (!(params.avgSegmentLength >= 0.0)) {
    throw std::invalid_argument("segment length must be non-negative");
  }
  if (params.queryWordPr.empty()) {
    throw std::invalid_argument("query must hold at least one word");
  }
  if (params.queryWordPr.size() > params.totalKeywords) {
    throw std::invalid_argument("query holds more words than the space");
  }
  for (double pr : params.queryWordPr) {
    if (!(pr >= 0.0 && pr <= 1.0)) {
      throw std::invalid_argument("word probabilities must lie in [0,1]");
    }
  }
}

double prHat1(const CostParams& params) {
  validateParams(params);
  double prod = 1.0;
  for (double pr : params.queryWordPr) {
    prod *= 1.0 - std::pow(1.0 - pr, params.avgWordsPerPlace);
  }
  return clamp01(prod);
}

double prJoint(std::uint32_t i, const CostParams& params) {
  requirePositiveOrder(i);
  validateParams(params);
  double prod = 1.0;
  for (double pr : params.queryWordPr) {
    prod *= 1.0 - std::pow(1.0 - pr, static_cast<double>(i) *
                                         params.avgWordsPerPlace);
  }
  return clamp01(prod);
}

double p1(std::uint32_t i, const CostParams& params) {
  requirePositiveOrder(i);
  const double h1 = prHat1(params);
  double sum = 0.0;
  for (std::uint32_t j = 1; j <= i; ++j) {
    sum += binom(i, j) * std::pow(h1, j) * std::pow(1.0 - h1, i - j);
  }
  return clamp01(sum);
}

double p2(std::uint32_t i, const CostParams& params) {
  requirePositiveOrder(i);
  validateParams(params);
  if (i <= 2) {
    return 0.0;
  }
  const std::vector<double> t = prHatTable(i - 1, params);
  double sum = 0.0;
  for (std::uint32_t j = 2; j + 1 <= i; ++j) {
    sum += (binom(i, j) - binom(i - 2, j - 2)) * t[j] *
           (1.0 - prJoint(i - j, params));
  }
  return clamp01(sum);
}

double prHatI(std::uint32_t i, const CostParams& params) {
  requirePositiveOrder(i);
  validateParams(params);
  return prHatTable(i, params)[i];
}

CostEstimate expectedEstimate(const CostParams& params) {
  validateParams(params);
  CostEstimate est;
  if (params.maxPlaces >= 2) {
    const std::vector<double> t = prHatTable(params.maxPlaces - 1, params);
    for (std::uint32_t i = 1; i + 1 <= params.maxPlaces; ++i) {
      est.expectedPlaces += static_cast<double>(i) * t[i];
    }
  }
  const double q = static_cast<double>(params.queryWordPr.size());
  const double cells =
      std::ceil(static_cast<double>(params.totalKeywords) /
                (params.avgWordsPerPlace * q));
  const double density =
      std::sqrt(static_cast<double>(params.trajectoryCount) *
                static_cast<double>(params.maxPlaces));
  est.estDistance = params.spaceSide / density * cells +
                    params.avgSegmentLength * est.expectedPlaces;
  return est;
}

CostParams paramsFromIndex(const BckIndex& index, const Query& q) {
  const IndexStats& s = index.stats();
  if (s.trajectoryCount == 0) {
    throw std::invalid_argument("index holds no trajectories");
  }
  if (s.keywordSlotCount == 0) {
    throw std::invalid_argument("index holds no keywords");
  }
  CostParams params;
  params.totalKeywords = index.vocab().size();
  params.maxPlaces = s.maxPlacesPerTrajectory;
  params.avgWordsPerPlace = static_cast<double>(s.keywordSlotCount) /
                            static_cast<double>(s.placeCount);
  params.trajectoryCount = s.trajectoryCount;
  params.spaceSide = index.grid().side();
  params.avgSegmentLength =
      s.segmentCount == 0
          ? 0.0
          : s.segmentLengthSum / static_cast<double>(s.segmentCount);
  params.queryWordPr.reserve(q.keywords.size());
  for (WordId w : q.keywords) {
    const double occ = w < index.vocab().size()
                           ? static_cast<double>(
                                 index.vocab().placeOccurrences(w))
                           : 0.0;
    params.queryWordPr.push_back(
        occ / static_cast<double>(s.keywordSlotCount));
  }
  validateParams(params);
  return params;
}

McEstimate mcSinglePlaceCovers(const CostParams& params,
                               std::uint64_t samples, std::uint64_t seed) {
  validateParams(params);
  requireSamples(samples);
  const std::vector<double> presence = presenceProbs(params);
  const WordMask full = (WordMask{1} << presence.size()) - 1;
  std::mt19937_64 rng(seed);
  std::uint64_t hits = 0;
  for (std::uint64_t n = 0; n < samples; ++n) {
    if (drawPlace(rng, presence) == full) {
      ++hits;
    }
  }
  return indicatorEstimate(hits, samples);
}

McEstimate mcJointlyContains(std::uint32_t i, const CostParams& params,
                             std::uint64_t samples, std::uint64_t seed) {
  requirePositiveOrder(i);
  validateParams(params);
  requireSamples(samples);
  const std::vector<double> presence = presenceProbs(params);
  const WordMask full = (WordMask{1} << presence.size()) - 1;
  std::mt19937_64 rng(seed);
  std::vector<WordMask> places(i);
  std::uint64_t hits = 0;
  for (std::uint64_t n = 0; n < samples; ++n) {
    for (WordMask& m : places) {
      m = drawPlace(rng, presence);
    }
    if (jointlyCovers(places, full)) {
      ++hits;
    }
  }
  return indicatorEstimate(hits, samples);
}

McEstimate mcProperSubsetCount(std::uint32_t i, const CostParams& params,
                               std::uint64_t samples, std::uint64_t seed) {
  if (i < 3) {
    throw std::invalid_argument("subset counting needs at least 3 places");
  }
  if (i > 16) {
    throw std::invalid_argument("subset counting is exponential in i");
  }
  validateParams(params);
  requireSamples(samples);
  const std::vector<double> presence = presenceProbs(params);
  const WordMask full = (WordMask{1} << presence.size()) - 1;
  const std::uint32_t endpointBoth = 1u | (1u << (i - 1));
  std::mt19937_64 rng(seed);
  std::vector<WordMask> places(i);
  std::vector<WordMask> subset;
  double sum = 0.0;
  double sumSq = 0.0;
  for (std::uint64_t n = 0; n < samples; ++n) {
    for (WordMask& m : places) {
      m = drawPlace(rng, presence);
    }
    std::uint32_t count = 0;
    for (std::uint32_t pick = 1; pick + 1 < (1u << i); ++pick) {
      const std::uint32_t size =
          static_cast<std::uint32_t>(std::popcount(pick));
      if (size < 2 || size >= i ||
          (pick & endpointBoth) == endpointBoth) {
        continue;
      }
      subset.clear();
      WordMask rest = 0;
      for (std::uint32_t p = 0; p < i; ++p) {
        if (pick & (1u << p)) {
          subset.push_back(places[p]);
        } else {
          rest |= places[p];
        }
      }
      if (rest != full && jointlyCovers(subset, full)) {
        ++count;
      }
    }
    sum += count;
    sumSq += static_cast<double>(count) * count;
  }
  McEstimate e;
  e.samples = samples;
  e.mean = sum / static_cast<double>(samples);
  const double var =
      std::max(0.0, sumSq / static_cast<double>(samples) - e.mean * e.mean);
  e.sigma = std::sqrt(var / static_cast<double>(samples));
  return e;
}

QuadCount windowQuadCount(const Grid& grid, const BoundingBox& window) {
  QuadCount qc;
  for (std::size_t i = 0; i < grid.leaves().size(); ++i) {
    const BoundingBox rect = grid.cellRect(grid.leafCell(i));
    if (!rect.intersects(window)) {
      continue;
    }
    const bool inside = rect.minX >= window.minX && rect.maxX <= window.maxX &&
                        rect.minY >= window.minY && rect.maxY <= window.maxY;
    if (inside) {
      ++qc.enclosed;
    } else {
      ++qc.overlapping;
    }
  }
  return qc;
}

}  // namespace tksk
