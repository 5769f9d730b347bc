#include "dewp/eval.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dewp/errors.hpp"
#include "dewp/rng.hpp"
#include "dewp/serialize.hpp"

namespace dewp {

namespace {

void check_lengths(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw DimensionError("metric length mismatch: " + std::to_string(y.size()) + " vs " +
                         std::to_string(yhat.size()));
  }
  if (y.empty()) throw DimensionError("metric over empty vectors");
}

}  // namespace

double mae(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - yhat[i]);
  return acc / static_cast<double>(y.size());
}

double mape(std::span<const double> y, std::span<const double> yhat, double floor) {
  check_lengths(y, yhat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    acc += std::abs(y[i] - yhat[i]) / std::max(std::abs(y[i]), floor);
  }
  return acc / static_cast<double>(y.size());
}

double mspe(std::span<const double> y, std::span<const double> yhat, double floor) {
  check_lengths(y, yhat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    acc += e * e / std::max(std::abs(y[i]), floor);
  }
  return acc / static_cast<double>(y.size());
}

double mse(std::span<const double> y, std::span<const double> yhat) {
  check_lengths(y, yhat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    acc += e * e;
  }
  return acc / static_cast<double>(y.size());
}

std::vector<std::int64_t> RollingPlan::origins() const {
  if (horizon < 1) throw ConfigError("rolling plan horizon must be >= 1");
  if (interval < 0) throw ConfigError("rolling plan interval must be >= 1 (or 0 for horizon)");
  std::vector<std::int64_t> out;
  const int step = effective_interval();
  for (std::int64_t t = start_hour; t + horizon - 1 <= end_hour; t += step) out.push_back(t);
  return out;
}

namespace {

struct Flattened {
  std::vector<double> y_true;
  std::vector<double> y_pred;
};

Flattened flatten(const std::vector<OriginRecord>& origins) {
  Flattened f;
  for (const OriginRecord& rec : origins) {
    f.y_true.insert(f.y_true.end(), rec.y_true.begin(), rec.y_true.end());
    f.y_pred.insert(f.y_pred.end(), rec.y_pred.begin(), rec.y_pred.end());
  }
  return f;
}

}  // namespace

void MetricsReport::verify_self_consistency() const {
  Flattened f = flatten(origins);
  if (static_cast<std::int64_t>(f.y_true.size()) != n_points) {
    throw ContractError("metrics report: n_points does not match stored records");
  }
  const double tol = 1e-12;
  if (std::abs(mae(f.y_true, f.y_pred) - mae_norm) > tol ||
      std::abs(mape(f.y_true, f.y_pred, floor) - mape_norm) > tol ||
      std::abs(mspe(f.y_true, f.y_pred, floor) - mspe_norm) > tol ||
      std::abs(mse(f.y_true, f.y_pred) - mse_norm) > tol) {
    throw ContractError("metrics report aggregates disagree with stored records");
  }
}

MetricsReport rolling_evaluate(const Forecaster& forecaster, const HourlySeries& series,
                               const RollingPlan& plan, const NormalizationStats& stats,
                               int lookback, double floor) {
  if (lookback < 1) throw ConfigError("rolling_evaluate lookback must be >= 1");
  const std::vector<std::int64_t> origins = plan.origins();
  if (origins.empty()) {
    throw ConfigError("rolling plan [" + format_hour(plan.start_hour) + ", " +
                      format_hour(plan.end_hour) + "] admits no forecast origin");
  }
  const std::int64_t series_start = series.start_hour;
  const std::int64_t series_end = series.start_hour + series.hours();  // exclusive
  const std::int64_t needed_start = origins.front() - lookback;
  if (needed_start < series_start) {
    throw ConfigError("insufficient history before first origin " + format_hour(origins.front()) +
                      ": need " + std::to_string(lookback) + " hours from " +
                      format_hour(needed_start) + ", series starts at " + format_hour(series_start));
  }
  if (origins.back() + plan.horizon > series_end) {
    throw ConfigError("rolling plan extends past the series end " + format_hour(series_end - 1));
  }

  const int target = series.target_index();
  std::vector<int> feature_rows;
  for (int v = 0; v < series.var_count(); ++v) {
    if (v != target) feature_rows.push_back(v);
  }

  MetricsReport report;
  report.floor = floor;
  for (std::int64_t origin : origins) {
    const int s = static_cast<int>(origin - lookback - series_start);
    WindowSample sample;
    sample.origin_hour = origin;
    for (int v : feature_rows) {
      sample.lookback.emplace_back(
          series.matrix[static_cast<std::size_t>(v)].begin() + s,
          series.matrix[static_cast<std::size_t>(v)].begin() + s + lookback);
    }
    for (int t = 0; t < lookback; ++t) {
      sample.time_features.push_back(time_features_of_hour(origin - lookback + t));
    }
    const auto& trow = series.matrix[static_cast<std::size_t>(target)];
    sample.target.assign(trow.begin() + s + lookback, trow.begin() + s + lookback + plan.horizon);

    OriginRecord rec;
    rec.origin_hour = origin;
    rec.y_true = sample.target;
    rec.y_pred = forecaster.predict(sample);
    if (rec.y_pred.size() != static_cast<std::size_t>(plan.horizon)) {
      throw ContractError("forecaster returned " + std::to_string(rec.y_pred.size()) +
                          " values, plan expects " + std::to_string(plan.horizon));
    }
    report.origins.push_back(std::move(rec));
  }

  Flattened f = flatten(report.origins);
  report.n_points = static_cast<std::int64_t>(f.y_true.size());
  report.mae_norm = mae(f.y_true, f.y_pred);
  report.mape_norm = mape(f.y_true, f.y_pred, floor);
  report.mspe_norm = mspe(f.y_true, f.y_pred, floor);
  report.mse_norm = mse(f.y_true, f.y_pred);

  const VariableStats& tv = stats.for_variable(series.target_name);
  std::vector<double> raw_true(f.y_true.size()), raw_pred(f.y_pred.size());
  for (std::size_t i = 0; i < f.y_true.size(); ++i) {
    raw_true[i] = denormalize_value(f.y_true[i], tv);
    raw_pred[i] = denormalize_value(f.y_pred[i], tv);
  }
  report.mae_raw = mae(raw_true, raw_pred);
  return report;
}

std::string format_metrics_report(const MetricsReport& report, const std::string& config_digest) {
  report.verify_self_consistency();
  std::ostringstream os;
  os.precision(17);
  os << "# dewp-metrics v1\n";
  os << "# tool: " << kToolVersion << "\n";
  os << "# config_digest: " << config_digest << "\n";
  os << "# floor: " << report.floor << "\n";
  const std::size_t H = report.origins.empty() ? 0 : report.origins.front().y_pred.size();
  os << "origin";
  for (std::size_t h = 1; h <= H; ++h) os << ",pred_" << h;
  for (std::size_t h = 1; h <= H; ++h) os << ",true_" << h;
  os << "\n";
  for (const OriginRecord& rec : report.origins) {
    os << format_hour(rec.origin_hour);
    for (double v : rec.y_pred) os << "," << v;
    for (double v : rec.y_true) os << "," << v;
    os << "\n";
  }
  os << "# n_points: " << report.n_points << "\n";
  os << "# mae_norm: " << report.mae_norm << "\n";
  os << "# mape_norm: " << report.mape_norm << "\n";
  os << "# mspe_norm: " << report.mspe_norm << "\n";
  os << "# mse_norm: " << report.mse_norm << "\n";
  os << "# mae_raw: " << report.mae_raw << "\n";
  return os.str();
}

void write_metrics_report(const MetricsReport& report, const std::string& config_digest,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics report to " + path);
  out << format_metrics_report(report, config_digest);
}

MetricsReport parse_metrics_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open metrics report: " + path);
  MetricsReport report;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string key;
      ls >> key;
      auto value = [&]() {
        double v = 0.0;
        ls >> v;
        return v;
      };
      if (key == "floor:") report.floor = value();
      else if (key == "n_points:") report.n_points = static_cast<std::int64_t>(value());
      else if (key == "mae_norm:") report.mae_norm = value();
      else if (key == "mape_norm:") report.mape_norm = value();
      else if (key == "mspe_norm:") report.mspe_norm = value();
      else if (key == "mse_norm:") report.mse_norm = value();
      else if (key == "mae_raw:") report.mae_raw = value();
      continue;
    }
    if (!have_header && line.rfind("origin", 0) == 0) {
      have_header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 3 || (cells.size() - 1) % 2 != 0) {
      throw DataError("malformed metrics row in " + path + ": " + line);
    }
    const std::size_t H = (cells.size() - 1) / 2;
    OriginRecord rec;
    rec.origin_hour = hours_since_epoch(parse_datetime(cells[0]));
    for (std::size_t h = 0; h < H; ++h) rec.y_pred.push_back(std::strtod(cells[1 + h].c_str(), nullptr));
    for (std::size_t h = 0; h < H; ++h) rec.y_true.push_back(std::strtod(cells[1 + H + h].c_str(), nullptr));
    report.origins.push_back(std::move(rec));
  }
  return report;
}

LinearBaseline::LinearBaseline(int features, int lookback, int horizon, int hidden,
                               std::uint64_t seed)
    : features_(features), lookback_(lookback) {
  if (features < 1 || lookback < 1 || horizon < 1 || hidden < 1) {
    throw ConfigError("linear baseline dimensions must be >= 1");
  }
  Rng rng(seed);
  const int in = features * lookback;
  auto init = [&rng](int out_dim, int in_dim) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    std::vector<double> w(static_cast<std::size_t>(out_dim) * in_dim);
    for (double& v : w) v = rng.uniform(-bound, bound);
    Tensor t = Tensor::from({out_dim, in_dim}, std::move(w));
    t.set_requires_grad();
    return t;
  };
  w1 = init(hidden, in);
  b1 = Tensor::zeros({hidden});
  b1.set_requires_grad();
  w2 = init(horizon, hidden);
  b2 = Tensor::zeros({horizon});
  b2.set_requires_grad();
}

Tensor LinearBaseline::forward_window(const WindowSample& sample) const {
  if (static_cast<int>(sample.lookback.size()) != features_) {
    throw DimensionError("baseline expects " + std::to_string(features_) + " feature rows, got " +
                         std::to_string(sample.lookback.size()));
  }
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(features_) * lookback_);
  for (const auto& row : sample.lookback) flat.insert(flat.end(), row.begin(), row.end());
  Tensor x = Tensor::from({1, features_ * lookback_}, std::move(flat));
  Tensor hidden = relu(add_row_bias(matmul(x, transpose(w1)), b1));
  Tensor out = add_row_bias(matmul(hidden, transpose(w2)), b2);
  return reshape(out, {w2.dim(0)});
}

std::vector<Tensor> LinearBaseline::parameters() const { return {w1, b1, w2, b2}; }

std::vector<std::string> LinearBaseline::parameter_names() const {
  return {"w1", "b1", "w2", "b2"};
}

std::vector<double> LinearBaseline::predict(const WindowSample& sample) const {
  Tensor out = forward_window(sample);
  auto v = out.values();
  return std::vector<double>(v.begin(), v.end());
}

}  // namespace dewp
