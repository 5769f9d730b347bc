#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dewp/errors.hpp"
#include "dewp/eval.hpp"
#include "support/synthetic.hpp"
#include "support/testutil.hpp"

using namespace dewp;
using dewp::testing::TempDir;

namespace {

// Reads the true targets straight out of the sample.
class PerfectOracle : public Forecaster {
 public:
  std::vector<double> predict(const WindowSample& sample) const override { return sample.target; }
};

class ConstantForecaster : public Forecaster {
 public:
  ConstantForecaster(double value, int horizon) : value_(value), horizon_(horizon) {}
  std::vector<double> predict(const WindowSample&) const override {
    return std::vector<double>(static_cast<std::size_t>(horizon_), value_);
  }

 private:
  double value_;
  int horizon_;
};

HourlySeries line_series(int hours, double slope, const std::string& start = "2016-06-01T00:00") {
  HourlySeries s;
  s.start_hour = hours_since_epoch(parse_datetime(start));
  s.variables = {"speed", "power"};
  s.target_name = "power";
  s.matrix.assign(2, std::vector<double>(static_cast<std::size_t>(hours)));
  for (int t = 0; t < hours; ++t) {
    s.matrix[0][static_cast<std::size_t>(t)] = 0.3;
    s.matrix[1][static_cast<std::size_t>(t)] = slope * t;
  }
  return s;
}

NormalizationStats unit_stats(const HourlySeries& s) {
  NormalizationStats stats;
  stats.variables = s.variables;
  stats.fitted_on = "train";
  for (std::size_t i = 0; i < s.variables.size(); ++i) stats.stats.push_back({0.0, 1.0, 0.5});
  return stats;
}

}  // namespace

TEST_CASE("metric basics") {
  std::vector<double> y = {1, 2};
  std::vector<double> same = {1, 2};
  CHECK(mae(y, same) == 0.0);
  CHECK(mape(y, same) == 0.0);
  CHECK(mspe(y, same) == 0.0);

  std::vector<double> yhat = {1, 3};
  CHECK(mae(y, yhat) == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<double> y2 = {2}, yhat2 = {1};
  CHECK(mape(y2, yhat2) == doctest::Approx(0.5).epsilon(1e-15));

  std::vector<double> y3 = {2}, yhat3 = {0};
  CHECK(mspe(y3, yhat3) == doctest::Approx(2.0).epsilon(1e-15));

  std::vector<double> shorter = {1};
  CHECK_THROWS_AS(mae(y, shorter), DimensionError);
  CHECK_THROWS_AS(mape(y, shorter), DimensionError);
  CHECK_THROWS_AS(mspe(y, shorter), DimensionError);
}

TEST_CASE("metrics agree with brute-force loop oracles within 1e-12") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-3.0, 3.0);
  const double floor = 1e-3;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 100;
    std::vector<double> y(n), yhat(n);
    for (auto& v : y) v = dist(rng);
    for (auto& v : yhat) v = dist(rng);
    if (trial % 3 == 0) y[static_cast<std::size_t>(trial % n)] = 0.0;  // exercise the floor

    double o_mae = 0, o_mape = 0, o_mspe = 0;
    for (int i = 0; i < n; ++i) {
      o_mae += std::abs(y[static_cast<std::size_t>(i)] - yhat[static_cast<std::size_t>(i)]);
      o_mape += std::abs(y[static_cast<std::size_t>(i)] - yhat[static_cast<std::size_t>(i)]) /
                std::max(std::abs(y[static_cast<std::size_t>(i)]), floor);
      const double e = y[static_cast<std::size_t>(i)] - yhat[static_cast<std::size_t>(i)];
      o_mspe += e * e / std::max(std::abs(y[static_cast<std::size_t>(i)]), floor);
    }
    o_mae /= n;
    o_mape /= n;
    o_mspe /= n;
    CHECK(std::abs(mae(y, yhat) - o_mae) <= 1e-12);
    CHECK(std::abs(mape(y, yhat, floor) - o_mape) <= 1e-12);
    CHECK(std::abs(mspe(y, yhat, floor) - o_mspe) <= 1e-12);
  }
}

TEST_CASE("mape with an exact zero target stays finite via the floor") {
  std::vector<double> y = {0.0};
  std::vector<double> yhat = {0.5};
  CHECK(std::isfinite(mape(y, yhat, 1e-3)));
  CHECK(mape(y, yhat, 1e-3) == doctest::Approx(500.0).epsilon(1e-12));
}

TEST_CASE("rolling plan tiles the range without overlap when interval equals horizon") {
  RollingPlan plan;
  plan.start_hour = 100;
  plan.end_hour = 100 + 72 - 1;
  plan.horizon = 24;
  auto origins = plan.origins();
  REQUIRE(origins.size() == 3);
  CHECK(origins[0] == 100);
  CHECK(origins[1] == 124);
  CHECK(origins[2] == 148);
  // each covered hour exactly once
  std::vector<std::int64_t> covered;
  for (auto o : origins)
    for (int h = 0; h < plan.horizon; ++h) covered.push_back(o + h);
  std::sort(covered.begin(), covered.end());
  CHECK(std::adjacent_find(covered.begin(), covered.end()) == covered.end());
  CHECK(covered.front() == plan.start_hour);
  CHECK(covered.back() == plan.end_hour);
}

TEST_CASE("a perfect oracle model scores zero on all three metrics") {
  HourlySeries series = line_series(200, 0.01);
  RollingPlan plan;
  plan.start_hour = series.start_hour + 100;
  plan.end_hour = series.start_hour + 199;
  plan.horizon = 24;
  PerfectOracle oracle;
  MetricsReport report = rolling_evaluate(oracle, series, plan, unit_stats(series), 24);
  CHECK(report.mae_norm == 0.0);
  CHECK(report.mape_norm == 0.0);
  CHECK(report.mspe_norm == 0.0);
  CHECK(report.mae_raw == 0.0);
  report.verify_self_consistency();
}

TEST_CASE("two origins with H=24 evaluate 48 points") {
  HourlySeries series = line_series(120, 0.005);
  RollingPlan plan;
  plan.start_hour = series.start_hour + 48;
  plan.end_hour = series.start_hour + 48 + 48 - 1;
  plan.horizon = 24;
  PerfectOracle oracle;
  MetricsReport report = rolling_evaluate(oracle, series, plan, unit_stats(series), 48);
  CHECK(report.origins.size() == 2);
  CHECK(report.n_points == 48);
}

TEST_CASE("predict-the-mean scores the mean absolute deviation of the targets") {
  HourlySeries series = line_series(64, 0.01);
  RollingPlan plan;
  plan.horizon = 8;
  plan.start_hour = series.start_hour + 32;
  plan.end_hour = series.start_hour + 63;
  // mean of the evaluated range [32, 64) of slope*t
  double mean_target = 0.0;
  for (int t = 32; t < 64; ++t) mean_target += 0.01 * t;
  mean_target /= 32.0;
  ConstantForecaster mean_model(mean_target, plan.horizon);
  MetricsReport report = rolling_evaluate(mean_model, series, plan, unit_stats(series), 16);
  double mad = 0.0;
  for (int t = 32; t < 64; ++t) mad += std::abs(0.01 * t - mean_target);
  mad /= 32.0;
  CHECK(std::abs(report.mae_norm - mad) <= 1e-10);
}

TEST_CASE("insufficient history before the first origin is a planning error") {
  HourlySeries series = line_series(50, 0.01);
  RollingPlan plan;
  plan.horizon = 8;
  plan.start_hour = series.start_hour + 10;  // only 10 hours of history
  plan.end_hour = series.start_hour + 49;
  PerfectOracle oracle;
  CHECK_THROWS_WITH_AS(rolling_evaluate(oracle, series, plan, unit_stats(series), 24),
                       doctest::Contains("insufficient history"), ConfigError);
}

TEST_CASE("denormalized MAE scales by the target range") {
  HourlySeries series = line_series(60, 0.01);
  RollingPlan plan;
  plan.horizon = 4;
  plan.start_hour = series.start_hour + 20;
  plan.end_hour = series.start_hour + 59;
  NormalizationStats stats = unit_stats(series);
  stats.stats[1] = {0.0, 2000.0, 500.0};  // power spans [0, 2000]
  ConstantForecaster constant(0.25, plan.horizon);
  MetricsReport report = rolling_evaluate(constant, series, plan, stats, 8);
  CHECK(report.mae_raw == doctest::Approx(report.mae_norm * 2000.0).epsilon(1e-12));
}

TEST_CASE("metrics report self-consistency detects tampering") {
  HourlySeries series = line_series(60, 0.01);
  RollingPlan plan;
  plan.horizon = 4;
  plan.start_hour = series.start_hour + 20;
  plan.end_hour = series.start_hour + 39;
  ConstantForecaster constant(0.1, plan.horizon);
  MetricsReport report = rolling_evaluate(constant, series, plan, unit_stats(series), 8);
  report.verify_self_consistency();
  report.mae_norm += 1e-6;
  CHECK_THROWS_AS(report.verify_self_consistency(), ContractError);
}

TEST_CASE("metrics report round-trips through its text form") {
  HourlySeries series = line_series(60, 0.01);
  RollingPlan plan;
  plan.horizon = 4;
  plan.start_hour = series.start_hour + 20;
  plan.end_hour = series.start_hour + 39;
  ConstantForecaster constant(0.1, plan.horizon);
  MetricsReport report = rolling_evaluate(constant, series, plan, unit_stats(series), 8);

  TempDir dir("metrics");
  const std::string path = dir.file("report.txt");
  write_metrics_report(report, "cfg-deadbeef", path);
  MetricsReport parsed = parse_metrics_report(path);
  REQUIRE(parsed.origins.size() == report.origins.size());
  for (std::size_t i = 0; i < parsed.origins.size(); ++i) {
    CHECK(parsed.origins[i].origin_hour == report.origins[i].origin_hour);
    for (std::size_t h = 0; h < parsed.origins[i].y_pred.size(); ++h) {
      CHECK(parsed.origins[i].y_pred[h] == report.origins[i].y_pred[h]);  // bitwise via %.17g
      CHECK(parsed.origins[i].y_true[h] == report.origins[i].y_true[h]);
    }
  }
  CHECK(parsed.mae_norm == report.mae_norm);
  CHECK(parsed.n_points == report.n_points);
  parsed.floor = report.floor;
  parsed.verify_self_consistency();
}

TEST_CASE("linear baseline with zero weights predicts its output bias") {
  LinearBaseline baseline(2, 8, 4, 16, 9);
  for (double& v : baseline.w1.mutable_values()) v = 0.0;
  for (double& v : baseline.w2.mutable_values()) v = 0.0;
  for (int h = 0; h < 4; ++h) baseline.b2.mutable_values()[static_cast<std::size_t>(h)] = 0.25 * h;
  WindowSample w;
  w.lookback = {std::vector<double>(8, 0.7), std::vector<double>(8, 0.1)};
  for (int t = 0; t < 8; ++t) w.time_features.push_back(TimeFeatures{0, 0, t});
  w.target = {0, 0, 0, 0};
  auto pred = baseline.predict(w);
  REQUIRE(pred.size() == 4);
  for (int h = 0; h < 4; ++h) CHECK(pred[static_cast<std::size_t>(h)] == 0.25 * h);
}

TEST_CASE("linear baseline passes a gradient check on a tiny instance") {
  LinearBaseline baseline(2, 4, 2, 6, 10);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> dist(0.1, 0.9);
  WindowSample w;
  w.lookback = {std::vector<double>(4), std::vector<double>(4)};
  for (auto& row : w.lookback)
    for (double& v : row) v = dist(rng);
  for (int t = 0; t < 4; ++t) w.time_features.push_back(TimeFeatures{0, 0, t});
  w.target = {dist(rng), dist(rng)};
  Tensor target = Tensor::from({2}, w.target);

  std::vector<std::pair<std::string, Tensor>> named;
  auto params = baseline.parameters();
  auto names = baseline.parameter_names();
  for (std::size_t i = 0; i < params.size(); ++i) named.emplace_back(names[i], params[i]);
  auto result = dewp::testing::check_param_gradients(
      named, [&]() { return mse_loss(baseline.forward_window(w), target); }, 1e-6, 1e-5, 1e-5);
  CAPTURE(result.worst_param);
  CHECK(result.ok);
}

TEST_CASE("linear baseline learns a linear trend better than predicting the mean") {
  // power follows the feature with a lag, linearly
  const int T = 300;
  HourlySeries series;
  series.start_hour = hours_since_epoch(parse_datetime("2016-02-01T00:00"));
  series.variables = {"speed", "power"};
  series.target_name = "power";
  series.matrix.assign(2, std::vector<double>(T));
  for (int t = 0; t < T; ++t) {
    const double x = 0.5 + 0.4 * std::sin(2.0 * std::numbers::pi * t / 48.0);
    series.matrix[0][static_cast<std::size_t>(t)] = x;
    series.matrix[1][static_cast<std::size_t>(t)] = 0.8 * x + 0.1;
  }
  WindowDataset ds = chronological_split(make_windows(series, 8, 4, 1));
  LinearBaseline baseline(1, 8, 4, 32, 12);
  TrainConfig tc;
  tc.batch_size = 32;
  tc.learning_rate = 5e-3;
  tc.max_epochs = 40;
  tc.patience = 40;
  tc.seed = 13;
  train(baseline, ds, tc);
  const double model_mse = evaluate_mse(baseline, ds.validation);

  double mean_target = 0.0;
  std::int64_t count = 0;
  for (const auto& w : ds.train)
    for (double v : w.target) {
      mean_target += v;
      ++count;
    }
  mean_target /= static_cast<double>(count);
  double mean_mse = 0.0;
  count = 0;
  for (const auto& w : ds.validation)
    for (double v : w.target) {
      mean_mse += (v - mean_target) * (v - mean_target);
      ++count;
    }
  mean_mse /= static_cast<double>(count);
  CHECK(model_mse < mean_mse);
}
