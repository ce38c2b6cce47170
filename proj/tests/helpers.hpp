// tests/helpers.hpp
//
// Shared builders and independent oracles for the test suites. Oracles are
// deliberately brute-force and must stay independent of the library
// implementations they check.

#ifndef TRACE2LR_TESTS_HELPERS_HPP
#define TRACE2LR_TESTS_HELPERS_HPP

#include <Eigen/Core>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "trace2lr/dataset.hpp"
#include "trace2lr/schema.hpp"

namespace t2t {

/// Dataset of purely numeric features. Subjects cycle over consecutive row
/// PAIRS so alternating labels never alias with the subject assignment;
/// phone/location cycle over the given level lists per row.
inline trace2lr::LabeledDataset make_numeric_dataset(
    const Eigen::MatrixXd& x, const std::vector<std::string>& labels, int n_subjects = 4,
    const std::vector<std::string>& phones = {"p0"},
    const std::vector<std::string>& locations = {"l0"}) {
  using namespace trace2lr;
  std::vector<Variable> vars;
  for (Eigen::Index f = 0; f < x.cols(); ++f)
    vars.push_back({"v" + std::to_string(f), VariableKind::noncumulative_numeric, "t"});
  LabeledDataset ds;
  ds.schema = VariableSchema(vars);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    MinuteSample s;
    s.minute = 60 * i;
    s.label = labels[static_cast<std::size_t>(i)];
    s.coverage_seconds = 60;
    s.prov = {"s" + std::to_string((i / 2) % n_subjects),
              phones[static_cast<std::size_t>(i) % phones.size()],
              locations[static_cast<std::size_t>(i) % locations.size()], "S1"};
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      const double v = x(i, f);
      s.features.push_back(std::isnan(v) ? FeatureValue::make_missing()
                                         : FeatureValue::make_number(v));
    }
    ds.samples.push_back(std::move(s));
  }
  ds.rebuild_vocabulary();
  return ds;
}

/// Two-class 1-D Gaussian dataset: class "a" ~ N(+mu, 1), class "b" ~ N(-mu, 1).
inline trace2lr::LabeledDataset make_two_gaussian_dataset(int n_per_class, double mu,
                                                          unsigned seed, int n_subjects = 4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::MatrixXd x(2 * n_per_class, 1);
  std::vector<std::string> labels;
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const bool h1 = i % 2 == 0;
    x(i, 0) = (h1 ? mu : -mu) + noise(rng);
    labels.push_back(h1 ? "a" : "b");
  }
  return make_numeric_dataset(x, labels, n_subjects);
}

// ---------------------------------------------------------------------------
// Exhaustive isotonic-regression oracle (n <= 12)
// ---------------------------------------------------------------------------

struct OraclePool {
  int begin = 0, end = 0;  // over the score-sorted order
  double mean = 0.0;
};

struct OracleIsotonic {
  std::vector<OraclePool> pools;  // canonical: maximal runs of equal value
  Eigen::ArrayXd fitted;          // per original index
};

/// Enumerates every partition of the score-sorted samples into consecutive
/// blocks (cuts only between distinct scores), keeps those with nondecreasing
/// block means, and maximizes sum(block_sum^2 / block_size) -- equivalent to
/// least squares -- in exact integer arithmetic (targets are 0/1).
inline OracleIsotonic exhaustive_isotonic(const Eigen::ArrayXd& scores,
                                          const Eigen::ArrayXd& targets) {
  const int n = static_cast<int>(scores.size());
  if (n == 0 || n > 20) throw std::invalid_argument("oracle: n out of range");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] < scores[b]; });

  // Positions where a cut is allowed (between distinct scores).
  std::vector<int> cut_ok;  // cut after sorted position p (p in 0..n-2)
  for (int p = 0; p + 1 < n; ++p)
    if (scores[order[static_cast<std::size_t>(p)]] !=
        scores[order[static_cast<std::size_t>(p + 1)]])
      cut_ok.push_back(p);

  const long long denom_lcm = 232792560LL;  // lcm(1..20)
  long long best_value = -1;
  std::vector<int> best_bounds;

  const int n_cuts = static_cast<int>(cut_ok.size());
  for (unsigned mask = 0; mask < (1u << n_cuts); ++mask) {
    std::vector<int> bounds;  // exclusive block ends over sorted order
    for (int c = 0; c < n_cuts; ++c)
      if (mask & (1u << c)) bounds.push_back(cut_ok[static_cast<std::size_t>(c)] + 1);
    bounds.push_back(n);

    long long value = 0;
    double prev_mean = -1.0;
    bool feasible = true;
    int start = 0;
    for (int end : bounds) {
      long long sum = 0;
      for (int p = start; p < end; ++p)
        sum += static_cast<long long>(targets[order[static_cast<std::size_t>(p)]]);
      const int size = end - start;
      const double mean = static_cast<double>(sum) / size;
      if (mean < prev_mean) {
        feasible = false;
        break;
      }
      prev_mean = mean;
      value += sum * sum * (denom_lcm / size);
      start = end;
    }
    if (!feasible) continue;
    if (value > best_value) {
      best_value = value;
      best_bounds = bounds;
    }
  }

  OracleIsotonic out;
  out.fitted.resize(n);
  int start = 0;
  std::vector<double> sorted_fit(static_cast<std::size_t>(n));
  for (int end : best_bounds) {
    long long sum = 0;
    for (int p = start; p < end; ++p)
      sum += static_cast<long long>(targets[order[static_cast<std::size_t>(p)]]);
    const double mean = static_cast<double>(sum) / (end - start);
    for (int p = start; p < end; ++p) {
      sorted_fit[static_cast<std::size_t>(p)] = mean;
      out.fitted[order[static_cast<std::size_t>(p)]] = mean;
    }
    start = end;
  }
  // Canonical pools: maximal runs of equal fitted value.
  int p = 0;
  while (p < n) {
    int q = p;
    while (q < n && sorted_fit[static_cast<std::size_t>(q)] ==
                        sorted_fit[static_cast<std::size_t>(p)])
      ++q;
    out.pools.push_back({p, q, sorted_fit[static_cast<std::size_t>(p)]});
    p = q;
  }
  return out;
}

}  // namespace t2t

#endif  // TRACE2LR_TESTS_HELPERS_HPP
