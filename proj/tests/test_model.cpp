#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "test_support.hpp"
#include "tksk/model.hpp"

using namespace tksk;
namespace ts = tksk::testsupport;

TEST_CASE("dist: identity, 3-4-5, translation") {
  CHECK(dist({0, 0}, {0, 0}) == 0.0);
  CHECK(dist({0, 0}, {3, 4}) == 5.0);
  CHECK(dist({1, 2}, {4, 6}) == 5.0);
  CHECK(dist({4, 6}, {1, 2}) == 5.0);
}

TEST_CASE("place normalizes keywords to a sorted set") {
  Place p({1, 2}, {7, 3, 7, 3, 1});
  CHECK(p.keywords() == std::vector<WordId>{1, 3, 7});
  CHECK(p.hasKeyword(3));
  CHECK_FALSE(p.hasKeyword(2));
  CHECK_THROWS_AS(Place({std::nan(""), 0}, {}), std::invalid_argument);
}

TEST_CASE("trajectory indexing is 1-based and bounds-checked") {
  Trajectory t(9, {Place({0, 0}, {1}), Place({1, 0}, {2})});
  CHECK(t.id() == 9);
  CHECK(t.size() == 2);
  CHECK(t.place(1).x() == 0.0);
  CHECK(t.place(2).x() == 1.0);
  CHECK_THROWS_AS(t.place(0), std::out_of_range);
  CHECK_THROWS_AS(t.place(3), std::out_of_range);
  CHECK_THROWS_AS(Trajectory(1, {}), std::invalid_argument);
  CHECK(t.keywordUnion() == std::vector<WordId>{1, 2});
}

TEST_CASE("makeQuery validates and normalizes") {
  Query q = makeQuery({0, 0}, {5, 2, 5}, 3);
  CHECK(q.keywords == std::vector<WordId>{2, 5});
  CHECK(q.k == 3);
  CHECK_THROWS_AS(makeQuery({0, 0}, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(makeQuery({0, 0}, {1}, 0), std::invalid_argument);
}

TEST_CASE("subMatches covers unions and rejects bad input") {
  Trajectory t(0, {Place({0, 0}, {1}), Place({1, 0}, {2})});
  CHECK(subMatches(t, 1, 2, {1, 2}));
  CHECK_FALSE(subMatches(t, 1, 1, {1, 2}));
  CHECK(subMatches(t, 2, 2, {2}));
  CHECK_THROWS_AS(subMatches(t, 1, 2, {}), std::invalid_argument);
  CHECK_THROWS_AS(subMatches(t, 0, 2, {1}), std::out_of_range);
  CHECK_THROWS_AS(subMatches(t, 2, 1, {1}), std::out_of_range);
  CHECK_THROWS_AS(subMatches(t, 1, 3, {1}), std::out_of_range);
}

TEST_CASE("matchDist: single place, non-match, and hand-computed window") {
  Trajectory one(0, {Place({3, 4}, {1, 2})});
  Query q1 = makeQuery({0, 0}, {1, 2}, 1);
  CHECK(matchDist(q1, one, 1, 1) == 5.0);

  // Window lacking a keyword scores infinity.
  Trajectory t(0, {Place({0, 0}, {1}), Place({1, 0}, {2}), Place({2, 0}, {3})});
  Query q2 = makeQuery({0, 1}, {2, 3}, 1);
  CHECK(matchDist(q2, t, 1, 2) == kNoMatch);

  // Places (0,0){a},(1,0){b},(2,0){c} queried from (0,1) on {b,c}: the
  // window (2,3) attaches at L_2 (distance sqrt(2)) and walks one unit.
  CHECK(matchDist(q2, t, 2, 3) == doctest::Approx(std::sqrt(2.0) + 1.0)
                                      .epsilon(1e-12));
}

TEST_CASE("matchDist properties on random instances") {
  std::mt19937_64 rng(1234);
  for (int iter = 0; iter < 300; ++iter) {
    Trajectory t = ts::randomTrajectory(rng, 0, 2 + ts::uniformInt(rng, 10),
                                        4);
    Query q = ts::randomQuery(rng, 4, 1 + ts::uniformInt(rng, 3));
    const auto n = static_cast<PlaceIndex>(t.size());

    // Containment monotonicity: a matching window keeps matching when grown;
    // a non-matching window cannot contain a matching one.
    for (PlaceIndex s = 1; s <= n; ++s) {
      for (PlaceIndex e = s; e <= n; ++e) {
        const bool m = subMatches(t, s, e, q.keywords);
        if (m && e < n) CHECK(subMatches(t, s, e + 1, q.keywords));
        if (m && s > 1) CHECK(subMatches(t, s - 1, e, q.keywords));
        if (!m && s < e) {
          CHECK_FALSE(subMatches(t, s + 1, e, q.keywords));
          CHECK_FALSE(subMatches(t, s, e - 1, q.keywords));
        }
        if (m) {
          // Anti-monotone distance under containment, and the window
          // distance dominates the distance to every place inside it.
          const double d = matchDist(q, t, s, e);
          if (e < n && subMatches(t, s, e + 1, q.keywords)) {
            CHECK(d <= matchDist(q, t, s, e + 1));
          }
          if (s > 1 && subMatches(t, s - 1, e, q.keywords)) {
            CHECK(d <= matchDist(q, t, s - 1, e));
          }
          double far = 0.0;
          for (PlaceIndex i = s; i <= e; ++i) {
            far = std::max(far, dist(q.location, t.place(i).location()));
          }
          CHECK(d >= far - 1e-12);
        }
      }
    }
  }
}
