#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "qdx/analysis.hpp"
#include "qdx/error.hpp"
#include "qdx/random.hpp"

using namespace qdx;

namespace {

constexpr double kTwoPi = 6.283185307179586;

std::vector<double> grid(double lo, double hi, int n) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = lo + (hi - lo) * i / (n - 1);
  return x;
}

std::vector<double> eval(FitModel m, const std::vector<double>& p, const std::vector<double>& x) {
  std::vector<double> y;
  for (double v : x) y.push_back(model_value(m, p, v));
  return y;
}

TimeSeries series(const std::vector<double>& v, double dt = 1.0) {
  TimeSeries s;
  for (std::size_t i = 0; i < v.size(); ++i) s.times.push_back(dt * i);
  s.values = v;
  return s;
}

}  // namespace

TEST(Fit, ExpDecayRecoversExactParameters) {
  std::vector<double> x;
  for (int m = 1; m <= 5000; m = static_cast<int>(m * 1.4) + 1) x.push_back(m);
  const std::vector<double> truth = {0.418, 0.99857, 0.558};
  const auto r = fit_nlls(FitModel::ExpDecay, x, eval(FitModel::ExpDecay, truth, x));
  ASSERT_TRUE(r.converged);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(r.params[k], truth[k], 1e-9);
  EXPECT_EQ(r.stderrs.size(), 3u);
}

TEST(Fit, SinusoidRecoversRabiFrequency) {
  const auto t = grid(0, 200, 201);  // ns
  const std::vector<double> truth = {0.5, -0.5, 0.01230, kTwoPi / 4};
  const auto r = fit_nlls(FitModel::Sinusoid, t, eval(FitModel::Sinusoid, truth, t));
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.param("freq") * 1e3, 12.30, 1e-6);  // MHz
  for (double ti : {3.0, 47.5, 151.2})
    EXPECT_NEAR(model_value(FitModel::Sinusoid, r.params, ti),
                model_value(FitModel::Sinusoid, truth, ti), 1e-10);
}

TEST(Fit, CosineFringeRecoversFrequencyAndPhase) {
  const auto t = grid(0, 50, 251);
  const std::vector<double> truth = {0.5, 0.5, 0.1010, 0.35};
  const auto r = fit_nlls(FitModel::CosineFringe, t, eval(FitModel::CosineFringe, truth, t));
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.param("freq"), 0.1010, 1e-9);
  EXPECT_NEAR(r.param("phase"), 0.35, 1e-6);
  EXPECT_NEAR(r.param("amp"), 0.5, 1e-9);
}

TEST(Fit, DampedSinusoidRecoversDecayTime) {
  const auto t = grid(0, 300, 301);
  const std::vector<double> truth = {0.5, 0.45, 0.0123, 0.3, 150};
  const auto r = fit_nlls(FitModel::DampedSinusoid, t, eval(FitModel::DampedSinusoid, truth, t));
  ASSERT_TRUE(r.converged);
  EXPECT_NEAR(r.param("tau"), 150, 1e-6);
  EXPECT_NEAR(r.param("freq"), 0.0123, 1e-10);
}

TEST(Fit, ConstantExpDecayIsDegenerate) {
  const std::vector<double> x = {1, 2, 4, 8, 16, 32};
  const std::vector<double> y(x.size(), 0.73);
  const auto r = fit_nlls(FitModel::ExpDecay, x, y);
  EXPECT_TRUE(r.degenerate);
  EXPECT_NEAR(r.param("A"), 0.0, 1e-12);
  EXPECT_NEAR(r.param("B"), 0.73, 1e-12);
}

TEST(Fit, TooFewPointsRejected) {
  EXPECT_THROW(fit_nlls(FitModel::ExpDecay, {1, 2, 3}, {1, 0.9, 0.8}), std::invalid_argument);
}

TEST(Fit, IterationBudgetExhaustionIsReported) {
  const auto t = grid(0, 200, 201);
  const std::vector<double> truth = {0.5, -0.5, 0.0123, 0.2};
  FitOptions o;
  o.max_iterations = 1;
  o.initial = std::vector<double>{0.4, -0.3, 0.0118, 0.0};
  const auto r = fit_nlls(FitModel::Sinusoid, t, eval(FitModel::Sinusoid, truth, t), o);
  EXPECT_FALSE(r.converged);
  EXPECT_TRUE(r.stderrs.empty());
  EXPECT_GE(r.residual_norm, 0.0);
}

TEST(Fit, ResidualNeverIncreasesWithMoreIterations) {
  const auto t = grid(0, 200, 101);
  Rng rng(1);
  auto y = eval(FitModel::Sinusoid, {0.5, 0.45, 0.0123, 0.1}, t);
  for (double& v : y) v += 0.01 * standard_normal(rng);
  FitOptions o;
  o.initial = std::vector<double>{0.45, 0.3, 0.0120, 0.5};
  double last = 1e300;
  for (int it = 1; it <= 40; ++it) {
    o.max_iterations = it;
    const auto r = fit_nlls(FitModel::Sinusoid, t, y, o);
    EXPECT_LE(r.residual_norm, last * (1 + 1e-12));
    last = r.residual_norm;
  }
}

// 100 seeded noisy datasets per model at SNR >= 20; coverage of 3 stderr.
class FitCoverage : public ::testing::TestWithParam<FitModel> {};

TEST_P(FitCoverage, TruthWithinThreeStandardErrors) {
  const FitModel model = GetParam();
  std::vector<double> x, truth;
  switch (model) {
    case FitModel::ExpDecay:
      x = grid(1, 3000, 40);
      truth = {0.42, 0.999, 0.55};
      break;
    case FitModel::Sinusoid:
      x = grid(0, 200, 120);
      truth = {0.5, 0.45, 0.0123, 0.7};
      break;
    case FitModel::DampedSinusoid:
      x = grid(0, 300, 150);
      truth = {0.5, 0.45, 0.0123, 0.7, 200};
      break;
    case FitModel::CosineFringe:
      x = grid(0, 40, 120);
      truth = {0.5, 0.45, 0.101, 0.35};
      break;
  }
  const double sigma = 0.02;  // amplitude 0.4-0.45 over noise gives SNR >= 20
  int covered = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed + 1000);
    auto y = eval(model, truth, x);
    for (double& v : y) v += sigma * standard_normal(rng);
    const auto r = fit_nlls(model, x, y);
    ASSERT_TRUE(r.converged);
    for (std::size_t k = 0; k < truth.size(); ++k) {
      if (r.names[k] == "phase") continue;  // checked through freq and amp jointly
      ++total;
      if (std::abs(r.params[k] - truth[k]) <= 3 * r.stderrs[k]) ++covered;
    }
  }
  EXPECT_GE(covered, 0.95 * total);
}

INSTANTIATE_TEST_SUITE_P(AllModels, FitCoverage,
                         ::testing::Values(FitModel::ExpDecay, FitModel::Sinusoid,
                                           FitModel::DampedSinusoid, FitModel::CosineFringe));

TEST(FitReport, FormatIsNameValueError) {
  const std::vector<double> x = {1, 2, 4, 8, 16, 32, 64};
  const auto r = fit_nlls(FitModel::ExpDecay, x, eval(FitModel::ExpDecay, {0.4, 0.97, 0.5}, x));
  std::ostringstream out;
  write_fit_report(out, r);
  const std::string s = out.str();
  EXPECT_NE(s.find("A "), std::string::npos);
  EXPECT_NE(s.find("p "), std::string::npos);
  EXPECT_NE(s.find("B "), std::string::npos);
}

TEST(Allan, ConstantSeriesIsZero) {
  const auto s = series(std::vector<double>(300, 0.999));
  for (const auto& pt : allan_deviation(s, default_allan_taus(s))) EXPECT_EQ(pt.deviation, 0.0);
}

TEST(Allan, BaseTauMatchesBruteForceExactly) {
  Rng rng(2);
  std::vector<double> v(500);
  for (double& x : v) x = standard_normal(rng);
  double acc = 0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) acc += (v[i + 1] - v[i]) * (v[i + 1] - v[i]);
  const double brute = std::sqrt(0.5 * acc / (v.size() - 1));
  const auto s = series(v, 30.0);
  const auto over = allan_deviation(s, {30.0});
  const auto non = allan_deviation_nonoverlapping(s, {30.0});
  EXPECT_EQ(over[0].deviation, brute);
  EXPECT_EQ(non[0].deviation, over[0].deviation);
}

TEST(Allan, WhiteNoiseSlopeIsMinusHalf) {
  Rng rng(3);
  std::vector<double> v(20000);
  for (double& x : v) x = standard_normal(rng);
  const auto s = series(v);
  std::vector<double> taus, ad;
  for (double t : {10.0, 20.0, 50.0, 100.0}) taus.push_back(t);
  for (const auto& p : allan_deviation(s, taus)) ad.push_back(p.deviation);
  EXPECT_NEAR(loglog_slope(taus, ad), -0.5, 0.1);
}

TEST(Allan, LinearDriftSlopeIsOne) {
  std::vector<double> v(3000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1e-4 * i;
  const auto s = series(v);
  std::vector<double> taus = {5, 10, 20, 50}, ad;
  for (const auto& p : allan_deviation(s, taus)) ad.push_back(p.deviation);
  EXPECT_NEAR(loglog_slope(taus, ad), 1.0, 0.1);
}

TEST(Allan, ErrorBarDefinition) {
  Rng rng(4);
  std::vector<double> v(1000);
  for (double& x : v) x = standard_normal(rng);
  const auto p = allan_deviation(series(v), {10.0});
  EXPECT_NEAR(p[0].stderr, p[0].deviation / std::sqrt(std::floor(1000.0 / 10) - 1), 1e-15);
}

TEST(Allan, InvalidTausRejected) {
  const auto s = series(std::vector<double>(90, 1.0));
  EXPECT_THROW(allan_deviation(s, {1.5}), std::invalid_argument);
  EXPECT_THROW(allan_deviation(s, {31.0}), std::invalid_argument);
  EXPECT_THROW(allan_deviation(s, {0.0}), std::invalid_argument);
}

TEST(Allan, DefaultTausAreMultiplesWithinThirdOfSpan) {
  const auto s = series(std::vector<double>(4800, 0.0), 30.0);
  const auto taus = default_allan_taus(s);
  ASSERT_FALSE(taus.empty());
  EXPECT_EQ(taus.front(), 30.0);
  for (double t : taus) {
    EXPECT_NEAR(std::remainder(t, 30.0), 0.0, 1e-9);
    EXPECT_LE(t, 4799 * 30.0 / 3 + 1e-9);
  }
}

TEST(Percentile, Examples) {
  std::vector<double> v(101);
  std::iota(v.begin(), v.end(), 0.0);
  EXPECT_DOUBLE_EQ(percentile(v, 90), 90.0);
  EXPECT_DOUBLE_EQ(percentile({4.2}, 13), 4.2);
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4}, 50), 2.5);
}

TEST(Percentile, ExclusionMask) {
  std::vector<double> v = {0.01, 0.02, 0.9, 0.03, 0.04};
  std::vector<bool> mask = {false, false, true, false, false};
  EXPECT_DOUBLE_EQ(percentile(v, 100, mask), 0.04);
  EXPECT_THROW(percentile({1.0}, 50, {true}), std::invalid_argument);
  EXPECT_THROW(percentile({}, 50), std::invalid_argument);
  EXPECT_THROW(percentile({1.0, 2.0}, 101), std::invalid_argument);
}
