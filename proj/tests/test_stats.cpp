#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "trace2lr/stats.hpp"

using namespace trace2lr;

namespace {

// Literal enumeration oracle: all 2^n sign assignments of the observed
// absolute differences, average ranks over ties.
double enumeration_p_greater(const std::vector<double>& diffs, double* stat_out = nullptr) {
  std::vector<double> d;
  for (double v : diffs)
    if (v != 0.0) d.push_back(v);
  const std::size_t n = d.size();
  if (n == 0) {
    if (stat_out) *stat_out = 0.0;
    return 1.0;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && std::abs(d[order[j]]) == std::abs(d[order[i]])) ++j;
    const double avg = (double(i + 1) + double(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) rank[order[k]] = avg;
    i = j;
  }
  double w_obs = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (d[k] > 0) w_obs += rank[k];
  if (stat_out) *stat_out = w_obs;

  std::size_t tail = 0;
  const std::size_t total = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double w = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (mask & (std::size_t{1} << k)) w += rank[k];
    if (w >= w_obs) ++tail;
  }
  return static_cast<double>(tail) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("all-zero differences give p = 1") {
  const auto r = wilcoxon_signed_rank_greater({0.0, 0.0, 0.0});
  CHECK(r.p_value == 1.0);
  CHECK(r.n_effective == 0);
  CHECK(r.statistic == 0.0);
}

TEST_CASE("hand case (+1,+2,+3,-1) matches the enumeration oracle") {
  const std::vector<double> diffs = {1, 2, 3, -1};
  double oracle_stat = 0;
  const double oracle_p = enumeration_p_greater(diffs, &oracle_stat);
  const auto r = wilcoxon_signed_rank_greater(diffs);
  CHECK(r.exact);
  CHECK(r.statistic == doctest::Approx(oracle_stat));
  CHECK(r.statistic == doctest::Approx(8.5));  // ranks 1.5 + 3 + 4
  CHECK(r.p_value == doctest::Approx(oracle_p).epsilon(1e-12));
}

TEST_CASE("exact p matches enumeration on random inputs up to n = 10") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 10);
    std::vector<double> d;
    for (int i = 0; i < n; ++i) {
      // Small integer magnitudes force plenty of ties and zeros.
      d.push_back(static_cast<double>(static_cast<int>(rng() % 7) - 3));
    }
    double oracle_stat = 0;
    const double oracle_p = enumeration_p_greater(d, &oracle_stat);
    const auto r = wilcoxon_signed_rank_greater(d);
    CHECK(r.exact);
    CHECK(r.statistic == doctest::Approx(oracle_stat));
    CHECK(r.p_value == doctest::Approx(oracle_p).epsilon(1e-12));
  }
}

TEST_CASE("clearly positive shifts give small one-sided p") {
  std::vector<double> d;
  for (int i = 0; i < 20; ++i) d.push_back(0.5 + 0.01 * i);
  const auto r = wilcoxon_signed_rank_greater(d);
  CHECK(r.p_value < 1e-5);
  std::vector<double> neg;
  for (double v : d) neg.push_back(-v);
  CHECK(wilcoxon_signed_rank_greater(neg).p_value > 0.999);
}

TEST_CASE("normal approximation is close to exact near the crossover size") {
  std::mt19937_64 rng(91);
  std::vector<double> d;
  for (int i = 0; i < 25; ++i)
    d.push_back((static_cast<double>(rng() % 1000) / 1000.0 - 0.35));
  const auto exact = wilcoxon_signed_rank_greater(d);
  REQUIRE(exact.exact);
  // Force the approximation by extending to 26 with a tiny extra value.
  std::vector<double> d26 = d;
  d26.push_back(1e-6);
  const auto approx = wilcoxon_signed_rank_greater(d26);
  CHECK_FALSE(approx.exact);
  CHECK(approx.p_value == doctest::Approx(exact.p_value).epsilon(0.15));
}
