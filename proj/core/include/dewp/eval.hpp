#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dewp/data.hpp"
#include "dewp/model.hpp"
#include "dewp/train.hpp"

namespace dewp {

inline constexpr double kDefaultMetricFloor = 1e-3;

/// (1/n) sum |y - yhat|
double mae(std::span<const double> y, std::span<const double> yhat);
/// (1/n) sum |y - yhat| / max(|y|, floor)
double mape(std::span<const double> y, std::span<const double> yhat,
            double floor = kDefaultMetricFloor);
/// (1/n) sum (y - yhat)^2 / max(|y|, floor)
double mspe(std::span<const double> y, std::span<const double> yhat,
            double floor = kDefaultMetricFloor);
double mse(std::span<const double> y, std::span<const double> yhat);

/// Forecast origins start at `start_hour` and advance by `interval` while the
/// whole horizon fits at or before `end_hour`. With interval == horizon the
/// forecast windows tile the evaluated range without overlap.
struct RollingPlan {
  std::int64_t start_hour = 0;
  std::int64_t end_hour = 0;  // last evaluable hour, inclusive
  int horizon = 24;
  int interval = 0;  // defaults to horizon when <= 0

  int effective_interval() const { return interval > 0 ? interval : horizon; }
  std::vector<std::int64_t> origins() const;
};

struct OriginRecord {
  std::int64_t origin_hour = 0;
  std::vector<double> y_true;  // normalized
  std::vector<double> y_pred;  // normalized
};

struct MetricsReport {
  double mae_norm = 0.0;
  double mape_norm = 0.0;
  double mspe_norm = 0.0;
  double mse_norm = 0.0;
  double mae_raw = 0.0;  // denormalized with the target variable's stats
  double floor = kDefaultMetricFloor;
  std::int64_t n_points = 0;
  std::vector<OriginRecord> origins;

  /// Recomputes each aggregate from the stored per-origin records and throws
  /// ContractError on any disagreement beyond 1e-12.
  void verify_self_consistency() const;
};

/// Anything that maps a lookback window to H forecast values.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::vector<double> predict(const WindowSample& sample) const = 0;
};

class DewpForecaster : public Forecaster {
 public:
  explicit DewpForecaster(const DewpModel& model) : model_(&model) {}
  std::vector<double> predict(const WindowSample& sample) const override {
    return model_->predict(sample);
  }

 private:
  const DewpModel* model_;
};

/// Rolling-origin evaluation over a normalized series. Lookbacks always use
/// observed values (never fed-back predictions) and may extend left of
/// plan.start_hour, so pass the full series (train tail + test).
/// Throws ConfigError when the series cannot supply L hours of history
/// before the first origin, listing required vs available hours.
MetricsReport rolling_evaluate(const Forecaster& forecaster, const HourlySeries& series,
                               const RollingPlan& plan, const NormalizationStats& stats,
                               int lookback, double floor = kDefaultMetricFloor);

/// Serialized MetricsReport: '#' header lines (config digest, floor), one CSV
/// row per origin carrying predictions then targets, '#' footer aggregates.
std::string format_metrics_report(const MetricsReport& report, const std::string& config_digest);
void write_metrics_report(const MetricsReport& report, const std::string& config_digest,
                          const std::string& path);
MetricsReport parse_metrics_report(const std::string& path);

// ---- Linear baseline ---------------------------------------------------

/// Two dense layers with a ReLU between: flatten(d*L) -> hidden -> H.
/// Trains with the same Adam harness and evaluates with the same rolling
/// plan as the main model.
class LinearBaseline : public TrainableModel, public Forecaster {
 public:
  LinearBaseline() = default;
  LinearBaseline(int features, int lookback, int horizon, int hidden, std::uint64_t seed);

  Tensor forward_window(const WindowSample& sample) const override;
  std::vector<Tensor> parameters() const override;
  std::vector<std::string> parameter_names() const override;
  std::vector<double> predict(const WindowSample& sample) const override;

  Tensor w1, b1;  // (hidden, d*L), (hidden)
  Tensor w2, b2;  // (H, hidden), (H)

 private:
  int features_ = 0;
  int lookback_ = 0;
};

}  // namespace dewp
