#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include <nlohmann/json.hpp>

#include "trace2lr/calibration.hpp"
#include "trace2lr/common.hpp"

using namespace trace2lr;

namespace {

Eigen::ArrayXd arr(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::ArrayXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::ArrayXi iarr(const std::vector<int>& v) {
  return Eigen::Map<const Eigen::ArrayXi>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Independent NLL for the grid-search oracle.
double oracle_nll(const Eigen::ArrayXd& s, const Eigen::ArrayXi& y, double w, double m) {
  double nll = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    double p = 1.0 / (1.0 + std::exp(-w * (s[i] - m)));
    p = std::min(std::max(p, 1e-300), 1.0 - 1e-16);
    nll -= y[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return nll;
}

// Coarse-to-fine grid search over (w, m), w >= 0, final resolution <= 1e-3.
std::pair<double, double> oracle_grid_fit(const Eigen::ArrayXd& s, const Eigen::ArrayXi& y) {
  double w_lo = 0.0, w_hi = 50.0;
  double m_lo = s.minCoeff() - 1.0, m_hi = s.maxCoeff() + 1.0;
  double best_w = 1.0, best_m = 0.0, best = std::numeric_limits<double>::infinity();
  for (int stage = 0; stage < 4; ++stage) {
    const int steps = 41;
    for (int i = 0; i < steps; ++i) {
      const double w = w_lo + (w_hi - w_lo) * i / (steps - 1);
      for (int j = 0; j < steps; ++j) {
        const double m = m_lo + (m_hi - m_lo) * j / (steps - 1);
        const double nll = oracle_nll(s, y, w, m);
        if (nll < best) {
          best = nll;
          best_w = w;
          best_m = m;
        }
      }
    }
    const double w_step = (w_hi - w_lo) / (steps - 1);
    const double m_step = (m_hi - m_lo) / (steps - 1);
    w_lo = std::max(0.0, best_w - 2 * w_step);
    w_hi = std::min(50.0, best_w + 2 * w_step);
    m_lo = best_m - 2 * m_step;
    m_hi = best_m + 2 * m_step;
  }
  return {best_w, best_m};
}

}  // namespace

TEST_CASE("logistic: symmetric separated pairs fit with midpoint zero, slope capped") {
  // Perfect separation: the L2 penalty stabilizes the fit at a finite slope,
  // the cap bounds it at 50 either way.
  const auto cal = fit_logistic(arr({-1, 1, -1, 1}), iarr({0, 1, 0, 1}));
  CHECK(cal.w > 1.0);
  CHECK(cal.w <= 50.0);
  CHECK(std::abs(cal.m) < 1e-6);
  CHECK(cal.posterior(cal.m) == 0.5);
  CHECK(cal.posterior(1.0) > 0.999);
  // Narrowly separated points push the unpenalized slope far past 50; the
  // cap then binds.
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 2000; ++i) {
    s.push_back(i % 2 ? 0.1 : -0.1);
    y.push_back(i % 2);
  }
  const auto capped = fit_logistic(arr(s), iarr(y));
  CHECK(capped.w == doctest::Approx(50.0));
  CHECK(std::abs(capped.m) < 1e-6);
}

TEST_CASE("logistic: c(m) = 0.5 for any fitted calibrator") {
  std::mt19937_64 rng(15);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 40; ++i) {
    const bool h1 = i % 2 == 0;
    s.push_back(g(rng) + (h1 ? 0.6 : -0.6));
    y.push_back(h1 ? 1 : 0);
  }
  const auto cal = fit_logistic(arr(s), iarr(y));
  CHECK(cal.posterior(cal.m) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cal.w > 0.0);
}

TEST_CASE("logistic: interleaved adverse scores never produce a negative slope") {
  // H2 scores sit above H1 on average; the constrained fit lands at w ~ 0.
  const auto s = arr({0.4, 0.6, 0.5, 0.7});
  const auto y = iarr({1, 1, 0, 0});
  const auto cal = fit_logistic(s, y);
  CHECK(cal.w >= 0.0);
  // Fitted NLL is no worse than the constrained grid-search oracle.
  const auto [gw, gm] = oracle_grid_fit(s, y);
  CHECK(oracle_nll(s, y, cal.w, cal.m) <= oracle_nll(s, y, gw, gm) + 1e-6);
}

TEST_CASE("logistic matches the grid-search oracle on random well-posed data") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> s;
    std::vector<int> y;
    for (int i = 0; i < 30; ++i) {
      const bool h1 = i % 2 == 0;
      s.push_back(g(rng) + (h1 ? 0.8 : -0.8));
      y.push_back(h1 ? 1 : 0);
    }
    const auto sa = arr(s);
    const auto ya = iarr(y);
    const auto cal = fit_logistic(sa, ya);
    const auto [gw, gm] = oracle_grid_fit(sa, ya);
    CHECK(oracle_nll(sa, ya, cal.w, cal.m) <= oracle_nll(sa, ya, gw, gm) + 1e-6);
    CHECK(cal.w == doctest::Approx(gw).epsilon(0.05));
  }
}

TEST_CASE("logistic input validation") {
  CHECK_THROWS_AS(fit_logistic(arr({1, 2}), iarr({1, 1})), ValidationError);
  CHECK_THROWS_AS(fit_logistic(arr({1}), iarr({1, 0})), ValidationError);
}

TEST_CASE("gaussian calibrator: two-point moments") {
  const auto cal = fit_gaussian(arr({1, 3, -1, -3}), iarr({1, 1, 0, 0}));
  CHECK(cal.mu1 == doctest::Approx(2.0));
  CHECK(cal.mu2 == doctest::Approx(-2.0));
  CHECK(cal.sigma1 == doctest::Approx(std::sqrt(2.0)));
  CHECK(cal.sigma2 == doctest::Approx(std::sqrt(2.0)));
  CHECK(cal.posterior(0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gaussian calibrator: zero variance advises logistic") {
  CHECK_THROWS_WITH_AS(fit_gaussian(arr({1, 1, 0, 2}), iarr({1, 1, 0, 0})),
                       doctest::Contains("logistic"), ValidationError);
  CHECK_THROWS_AS(fit_gaussian(arr({1, 0, 2}), iarr({1, 0, 0})), ValidationError);
}

TEST_CASE("gaussian posterior matches the direct density-ratio oracle") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const bool h1 = i % 3 != 0;
    s.push_back(g(rng) + (h1 ? 1.0 : -0.5));
    y.push_back(h1 ? 1 : 0);
  }
  const auto cal = fit_gaussian(arr(s), iarr(y));
  auto normal_pdf = [](double x, double mu, double sd) {
    return std::exp(-0.5 * (x - mu) * (x - mu) / (sd * sd)) / (sd * std::sqrt(2 * M_PI));
  };
  for (double probe : {-2.0, -0.5, 0.0, 0.7, 2.5}) {
    const double f1 = normal_pdf(probe, cal.mu1, cal.sigma1) * cal.pi1;
    const double f2 = normal_pdf(probe, cal.mu2, cal.sigma2) * cal.pi2;
    CHECK(cal.posterior(probe) == doctest::Approx(f1 / (f1 + f2)).epsilon(1e-12));
  }
}

TEST_CASE("kde calibrator: mirrored sets are symmetric at zero") {
  const auto cal = fit_kde(arr({0.5, 1.5, -0.5, -1.5}), iarr({1, 1, 0, 0}));
  CHECK(cal.posterior(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  // Silverman bandwidths.
  const double sd = std::sqrt(0.5);  // unbiased sd of {0.5, 1.5}
  CHECK(cal.bandwidth1 == doctest::Approx(1.06 * sd * std::pow(2.0, -0.2)).epsilon(1e-12));
}

TEST_CASE("kde far-tail probe favors the class with larger scores") {
  const auto cal = fit_kde(arr({2.0, 3.0, 4.0, -2.0, -3.0, -4.0}), iarr({1, 1, 1, 0, 0, 0}));
  CHECK(cal.posterior(50.0) > 0.5);
  CHECK(cal.posterior(-50.0) < 0.5);
  CHECK(std::isfinite(cal.posterior(500.0)));  // log-space evaluation
}

TEST_CASE("kde posterior matches the direct kernel-sum oracle") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> s;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const bool h1 = i % 2 == 0;
    s.push_back(g(rng) + (h1 ? 0.8 : -0.8));
    y.push_back(h1 ? 1 : 0);
  }
  const auto cal = fit_kde(arr(s), iarr(y));
  auto kde = [](double x, const Eigen::ArrayXd& pts, double h) {
    double sum = 0;
    for (Eigen::Index i = 0; i < pts.size(); ++i)
      sum += std::exp(-0.5 * (x - pts[i]) * (x - pts[i]) / (h * h));
    return sum / (static_cast<double>(pts.size()) * h * std::sqrt(2 * M_PI));
  };
  for (double probe : {-1.5, -0.3, 0.0, 0.9, 1.8}) {
    const double f1 = kde(probe, cal.scores1, cal.bandwidth1) * cal.pi1;
    const double f2 = kde(probe, cal.scores2, cal.bandwidth2) * cal.pi2;
    CHECK(cal.posterior(probe) == doctest::Approx(f1 / (f1 + f2)).epsilon(1e-12));
  }
}

TEST_CASE("prior odds from counts") {
  CHECK(prior_odds_from_counts(100, 50).value == doctest::Approx(2.0));
  CHECK(prior_odds_from_counts(50, 50).value == doctest::Approx(1.0));
  CHECK_THROWS_AS(prior_odds_from_counts(0, 50), ValidationError);
}

TEST_CASE("posterior to LR") {
  const PriorOdds one = prior_odds_from_counts(10, 10);
  const PriorOdds two = prior_odds_from_counts(20, 10);
  CHECK(posterior_to_lr(0.5, one) == doctest::Approx(1.0));
  CHECK(posterior_to_lr(2.0 / 3.0, one) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(posterior_to_lr(0.8, two) == doctest::Approx(2.0).epsilon(1e-12));
  // Degenerate posteriors are clamped, never infinite.
  CHECK(std::isfinite(posterior_to_lr(1.0, one)));
  CHECK(std::isfinite(posterior_to_lr(0.0, one)));
  CHECK(posterior_to_lr(1.0, one) > 1e8);
}

TEST_CASE("elub bounds: sample-size cap dominates a wide LR range") {
  const LogisticCalibrator cal{1.0, 0.0};  // LR = exp(score) at prior 1
  const double s4 = 4.0 * std::log(10.0);
  const auto b = compute_elub(arr({s4, -s4}), iarr({1, 0}), cal,
                              prior_odds_from_counts(99, 99));
  CHECK(b.upper_log10 == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(b.lower_log10 == doctest::Approx(-2.0).epsilon(1e-9));
}

TEST_CASE("elub bounds: data range dominates under large samples") {
  const LogisticCalibrator cal{1.0, 0.0};
  const auto b = compute_elub(arr({std::log(2.0), std::log(0.5)}), iarr({1, 0}),
                              cal, prior_odds_from_counts(1000000, 1000000));
  CHECK(b.upper_log10 == doctest::Approx(std::log10(2.0)).epsilon(1e-9));
  CHECK(b.lower_log10 == doctest::Approx(std::log10(0.5)).epsilon(1e-9));
}

TEST_CASE("elub bounds: small samples cap to one decade") {
  const LogisticCalibrator cal{1.0, 0.0};
  const auto b = compute_elub(arr({30.0, -30.0}), iarr({1, 0}), cal,
                              prior_odds_from_counts(9, 9));
  CHECK(b.upper_log10 == doctest::Approx(1.0));
  CHECK(b.lower_log10 == doctest::Approx(-1.0));
}

TEST_CASE("elub bounds always bracket zero") {
  const LogisticCalibrator cal{1.0, 0.0};
  // All training LRs above 1.
  const auto b = compute_elub(arr({2.0, 1.0}), iarr({1, 0}), cal, prior_odds_from_counts(50, 50));
  CHECK(b.lower_log10 <= 0.0);
  CHECK(b.upper_log10 >= 0.0);
}

TEST_CASE("apply_bounds clamps in log10 and preserves order") {
  const ElubBounds b{-2.0, 2.0};
  CHECK(apply_bounds(1e6, b) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(apply_bounds(3.0, b) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(apply_bounds(1e-6, b) == doctest::Approx(0.01).epsilon(1e-12));
  double prev = 0.0;
  for (double lr : {1e-9, 1e-3, 0.5, 1.0, 7.0, 1e5}) {
    const double v = apply_bounds(lr, b);
    CHECK(v >= prev);
    prev = v;
  }
  CHECK_THROWS_AS(apply_bounds(0.0, b), ValidationError);
}

TEST_CASE("uninformative model yields LR = 1") {
  // Identical features, imbalanced classes: posterior equals the training
  // prior, so the prior odds cancel exactly.
  const int n = 90;
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(n, 1, 2.0);
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % 3 == 0 ? "b" : "a");
  const auto ds = t2t::make_numeric_dataset(x, labels);
  ScorerConfig cfg;
  cfg.rounds = 20;
  cfg.max_depth = 2;
  cfg.learning_rate = 0.3;
  cfg.min_samples_leaf = 2;
  const LrSystem sys = fit_lr_system(ds, {"a"}, {"b"}, cfg, CalibratorKind::logistic);
  CHECK(sys.evaluate_lr(ds.samples[0]) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("monotone pipeline: higher raw score never lowers the LR") {
  const LogisticCalibrator cal{2.0, 0.1};
  const PriorOdds prior = prior_odds_from_counts(30, 50);
  const ElubBounds bounds{-1.5, 1.5};
  double prev = 0.0;
  bool first = true;
  for (double s = -6.0; s <= 6.0; s += 0.25) {
    const double lr = apply_bounds(posterior_to_lr(cal.posterior(s), prior), bounds);
    if (!first) CHECK(lr >= prev - 1e-15);
    prev = lr;
    first = false;
  }
}

TEST_CASE("separable two-Gaussian benchmark: H1 samples receive LR > 1") {
  const auto train = t2t::make_two_gaussian_dataset(150, 3.0, 123);
  ScorerConfig cfg;
  cfg.rounds = 30;
  cfg.max_depth = 3;
  cfg.learning_rate = 0.2;
  cfg.min_samples_leaf = 5;
  cfg.seed = 9;
  const LrSystem sys = fit_lr_system(train, {"a"}, {"b"}, cfg, CalibratorKind::logistic);
  const auto fresh = t2t::make_two_gaussian_dataset(150, 3.0, 321);
  int h1 = 0, above = 0;
  for (const auto& s : fresh.samples) {
    if (s.label != "a") continue;
    ++h1;
    if (sys.evaluate_lr(s) > 1.0) ++above;
  }
  CHECK(static_cast<double>(above) / h1 >= 0.95);
}

TEST_CASE("multiclass likelihoods") {
  Eigen::ArrayXd equal = Eigen::ArrayXd::Zero(4);
  const Eigen::ArrayXd u = multiclass_likelihoods_from_scores(equal);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(u[i] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(u.sum() == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::ArrayXd spiked(3);
  spiked << 200.0, 0.0, 0.0;
  const Eigen::ArrayXd sp = multiclass_likelihoods_from_scores(spiked);
  CHECK(sp[0] == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::ArrayXd pair(2);
  pair << 0.3, -0.4;  // margin s = 0.7 > 0: argmax must be class 0
  const Eigen::ArrayXd pp = multiclass_likelihoods_from_scores(pair);
  CHECK(pp[0] > pp[1]);
  pair << -0.2, 0.5;
  CHECK(multiclass_likelihoods_from_scores(pair)[1] > 0.5);
}

TEST_CASE("lr system serialization round-trips") {
  const auto train = t2t::make_two_gaussian_dataset(40, 1.0, 55);
  ScorerConfig cfg;
  cfg.rounds = 8;
  cfg.max_depth = 3;
  cfg.min_samples_leaf = 2;
  for (CalibratorKind kind :
       {CalibratorKind::logistic, CalibratorKind::gaussian, CalibratorKind::kde}) {
    const LrSystem sys = fit_lr_system(train, {"a"}, {"b"}, cfg, kind);
    const LrSystem back = LrSystem::from_json(sys.to_json());
    for (int i = 0; i < 10; ++i) {
      const auto& s = train.samples[static_cast<std::size_t>(i * 3)];
      CHECK(back.evaluate_lr(s) == doctest::Approx(sys.evaluate_lr(s)).epsilon(1e-15));
    }
    CHECK(back.bounds.lower_log10 == sys.bounds.lower_log10);
    CHECK(back.bounds.upper_log10 == sys.bounds.upper_log10);
  }
}
