#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "trace2lr/pav.hpp"

using namespace trace2lr;

TEST_CASE("pav on an already-isotonic sequence is the identity") {
  Eigen::ArrayXd scores(4), targets(4);
  scores << 1, 2, 3, 4;
  targets << 0, 0, 1, 1;
  const PavFit fit = pav_fit(scores, targets);
  REQUIRE(fit.pools.size() == 2);
  CHECK(fit.pools[0].mean == 0.0);
  CHECK(fit.pools[1].mean == 1.0);
  CHECK(fit.fitted[0] == 0.0);
  CHECK(fit.fitted[3] == 1.0);
}

TEST_CASE("pav merges violators") {
  Eigen::ArrayXd scores(3), targets(3);
  scores << 1, 2, 3;
  targets << 1, 0, 1;
  const PavFit fit = pav_fit(scores, targets);
  REQUIRE(fit.pools.size() == 2);
  CHECK(fit.pools[0].mean == doctest::Approx(0.5));
  CHECK(fit.pools[0].begin == 0);
  CHECK(fit.pools[0].end == 2);
  CHECK(fit.pools[1].mean == 1.0);
}

TEST_CASE("tied scores are fused before pooling") {
  Eigen::ArrayXd scores(4), targets(4);
  scores << 1, 1, 2, 2;
  targets << 0, 1, 1, 1;
  const PavFit fit = pav_fit(scores, targets);
  REQUIRE(fit.pools.size() == 2);
  CHECK(fit.pools[0].mean == doctest::Approx(0.5));
  CHECK(fit.pools[0].end == 2);
  CHECK(fit.fitted[0] == doctest::Approx(0.5));
  CHECK(fit.fitted[1] == doctest::Approx(0.5));
}

TEST_CASE("pav pools are strictly increasing and fitted values monotone") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 11);
    Eigen::ArrayXd scores(n), targets(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng() % 6);  // frequent ties
      targets[i] = static_cast<double>(rng() % 2);
    }
    const PavFit fit = pav_fit(scores, targets);
    for (std::size_t p = 1; p < fit.pools.size(); ++p)
      CHECK(fit.pools[p].mean > fit.pools[p - 1].mean);
    // Monotone in score.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (scores[i] < scores[j]) CHECK(fit.fitted[i] <= fit.fitted[j] + 1e-15);
  }
}

TEST_CASE("pav equals the exhaustive isotonic oracle on random instances") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    Eigen::ArrayXd scores(n), targets(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = (rng() % 2) ? static_cast<double>(rng() % 5)
                              : static_cast<double>(rng() % 1000) / 100.0;
      targets[i] = static_cast<double>(rng() % 2);
    }
    const PavFit fit = pav_fit(scores, targets);
    const t2t::OracleIsotonic oracle = t2t::exhaustive_isotonic(scores, targets);
    REQUIRE(fit.pools.size() == oracle.pools.size());
    for (std::size_t p = 0; p < fit.pools.size(); ++p) {
      CHECK(fit.pools[p].begin == oracle.pools[p].begin);
      CHECK(fit.pools[p].end == oracle.pools[p].end);
      CHECK(fit.pools[p].mean == oracle.pools[p].mean);
    }
    for (int i = 0; i < n; ++i) CHECK(fit.fitted[i] == oracle.fitted[i]);
  }
}
