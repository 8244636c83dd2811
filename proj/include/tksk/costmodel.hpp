#ifndef TKSK_COSTMODEL_HPP
#define TKSK_COSTMODEL_HPP

#include <cstdint>
#include <vector>

#include "tksk/bck_index.hpp"
#include "tksk/grid.hpp"
#include "tksk/model.hpp"

namespace tksk {

// Inputs of the analytical search-cost estimate. Probabilities are per
// query word: pr(w) is the chance that one keyword slot of a place holds w.
struct CostParams {
  std::uint64_t totalKeywords = 1;    // K: distinct words in the space
  std::uint32_t maxPlaces = 2;        // C: maximum places per trajectory
  double avgWordsPerPlace = 1.0;      // mean keyword slots per place
  std::uint64_t trajectoryCount = 1;  // Y
  double spaceSide = 1.0;             // L: side length of the space
  double avgSegmentLength = 0.0;      // mean distance of adjacent places
  std::vector<double> queryWordPr;    // pr(w) for each query word
};

// Throws std::invalid_argument unless all counts and sizes are positive,
// the segment length is non-negative, every pr lies in [0,1], and the
// query is non-empty with no more words than the space holds.
void validateParams(const CostParams& params);

// Probability that a single place covers all query words.
double prHat1(const CostParams& params);

// Probability that the union of i places covers all query words.
double prJoint(std::uint32_t i, const CostParams& params);

// Probability that at least one of i places covers all query words alone,
// computed as the binomial sum (equals 1 - (1 - prHat1)^i).
double p1(std::uint32_t i, const CostParams& params);

// Correction term: a proper subset (not containing both endpoints) jointly
// covers the words while the rest do not. Zero for i <= 2.
double p2(std::uint32_t i, const CostParams& params);

// Probability that i places jointly cover the query words: the union
// covers, and no proper subset does. i = 1 is the single-place coverage.
double prHatI(std::uint32_t i, const CostParams& params);

struct CostEstimate {
  double expectedPlaces = 0.0;  // expected count of places walked
  double estDistance = 0.0;     // estimated minimum match distance
};

CostEstimate expectedEstimate(const CostParams& params);

// Model parameters measured from a built index and a query: pr(w) is the
// word's share of all keyword slots. Throws std::invalid_argument when the
// index holds no trajectories or no keywords.
CostParams paramsFromIndex(const BckIndex& index, const Query& q);

// ---------------------------------------------------------------------------
// Monte Carlo validation.
//
// The samplers draw from the model's own generative idealization: each
// place contains each query word independently with probability
// 1 - (1 - pr(w))^avgWordsPerPlace. Under that space the single-place
// formula, the union formula, and the two-place joint coverage are exact;
// deeper recursion levels inherit the model's combinatorial approximations
// and are validated report-style.
// ---------------------------------------------------------------------------

struct McEstimate {
  double mean = 0.0;
  double sigma = 0.0;  // standard error of the mean
  std::uint64_t samples = 0;
};

// Frequency of one place covering every query word.
McEstimate mcSinglePlaceCovers(const CostParams& params,
                               std::uint64_t samples, std::uint64_t seed);

// Frequency of i places jointly covering the query words: the union
// covers and every place contributes a word no other place supplies.
McEstimate mcJointlyContains(std::uint32_t i, const CostParams& params,
                             std::uint64_t samples, std::uint64_t seed);

// Mean count of proper subsets (sizes 2..i-1, never both endpoints) that
// jointly cover while the complement's union does not — the expectation the
// p2 sum models by linearity.
McEstimate mcProperSubsetCount(std::uint32_t i, const CostParams& params,
                               std::uint64_t samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Window-query cost over the grid: quads touched by a window, split into
// partially overlapping and fully enclosed leaves.
// ---------------------------------------------------------------------------

struct QuadCount {
  std::uint64_t overlapping = 0;  // intersecting but not contained
  std::uint64_t enclosed = 0;     // leaf rectangle inside the window
};

QuadCount windowQuadCount(const Grid& grid, const BoundingBox& window);

}  // namespace tksk

#endif  // TKSK_COSTMODEL_HPP
