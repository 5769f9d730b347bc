#include "commands.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dewp/errors.hpp"
#include "dewp/eval.hpp"
#include "dewp/serialize.hpp"

namespace dewp::cli {

namespace {

namespace fs = std::filesystem;

void require_data_section(const RunConfig& config) {
  if (config.data.variables.empty()) {
    throw ConfigError("data.variables must list the CSV columns to ingest");
  }
  if (config.data.target.empty()) {
    throw ConfigError("data.target must name the power variable");
  }
  bool found = false;
  for (const auto& v : config.data.variables) {
    if (v == config.data.target) found = true;
  }
  if (!found) {
    throw ConfigError("data.target '" + config.data.target + "' is not listed in data.variables");
  }
}

int feature_count(const HourlySeries& series) {
  return series.var_count() - 1;  // the target is not a lookback channel
}

struct TrainedModel {
  DewpModel model;
  TrainReport report;
  OptimizerState optimizer;
};

TrainedModel train_on_bundle(const DatasetBundle& bundle, RunConfig config) {
  ModelConfig mc = config.model;
  mc.d = feature_count(bundle.train);
  mc.validate();
  auto windows = make_windows(bundle.train, mc.lookback, mc.horizon, config.data.stride);
  if (windows.size() < 2) {
    throw DataError("training split provides only " + std::to_string(windows.size()) +
                    " window(s); need at least 2 for a validation holdout");
  }
  WindowDataset dataset = chronological_split(std::move(windows));

  TrainedModel out{DewpModel(mc, config.train.seed), TrainReport{}, OptimizerState{}};
  DewpTrainable trainable(out.model);
  out.report = train(trainable, dataset, config.train);
  auto params = out.model.parameters();
  out.optimizer = init_adam_state(params);
  return out;
}

RollingPlan plan_from_config(const RunConfig& config, const DatasetBundle& bundle,
                             const ModelConfig& mc) {
  RollingPlan plan;
  plan.horizon = mc.horizon;
  plan.interval = config.eval.interval;
  plan.start_hour = config.eval.start.empty()
                        ? bundle.boundary_hour
                        : hours_since_epoch(parse_datetime(config.eval.start));
  HourlySeries full = bundle.full_series();
  plan.end_hour = config.eval.end.empty() ? full.start_hour + full.hours() - 1
                                          : hours_since_epoch(parse_datetime(config.eval.end));
  return plan;
}

MetricsReport evaluate_on_bundle(const DatasetBundle& bundle, const DewpModel& model,
                                 const RunConfig& config) {
  RollingPlan plan = plan_from_config(config, bundle, model.config());
  HourlySeries full = bundle.full_series();
  DewpForecaster forecaster(model);
  return rolling_evaluate(forecaster, full, plan, bundle.stats, model.config().lookback,
                          config.eval.floor);
}

std::string settings_of_cell(
    const std::vector<std::pair<std::string, std::vector<std::string>>>& axes,
    const std::vector<std::size_t>& index) {
  std::string out;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    if (a) out += " ";
    out += axes[a].first + "=" + axes[a].second[index[a]];
  }
  return out;
}

}  // namespace

void cmd_preprocess(const std::string& csv_path, const std::string& out_path, RunConfig config) {
  require_data_section(config);
  if (config.data.split_boundary.empty()) {
    throw ConfigError("data.split_boundary must be set for preprocessing");
  }

  LoadResult loaded = load_csv(csv_path, config.data.variables, config.data.timestamp_column);
  HourlySeries hourly = aggregate_hourly(loaded, config.data.target);
  const std::int64_t boundary = hours_since_epoch(parse_datetime(config.data.split_boundary));
  auto [train_raw, test_raw] = split_by_timestamp(hourly, boundary);
  if (train_raw.hours() == 0) throw DataError("split boundary leaves an empty training slice");

  NormalizationStats stats =
      fit_normalization(train_raw, "train:" + config.data.split_boundary);
  HourlySeries train_norm = apply_normalization(impute_missing(train_raw, stats), stats);
  HourlySeries test_norm = apply_normalization(impute_missing(test_raw, stats), stats);

  DatasetBundle bundle;
  bundle.train = std::move(train_norm);
  bundle.test = std::move(test_norm);
  bundle.stats = stats;
  bundle.boundary_hour = boundary;
  bundle.config_text = canonical_config_text(config);
  bundle.config_digest = config_digest_of(config);
  save_bundle(bundle, out_path);

  const std::int64_t train_windows = window_count(bundle.train.hours(), config.model.lookback,
                                                  config.model.horizon, config.data.stride);
  const std::int64_t test_windows = window_count(bundle.test.hours(), config.model.lookback,
                                                 config.model.horizon, config.data.stride);
  std::printf("rows: %zu (duplicates dropped: %d)\n", loaded.records.size(),
              loaded.duplicate_count);
  std::printf("hours: %d train / %d test (boundary %s)\n", bundle.train.hours(),
              bundle.test.hours(), format_hour(boundary).c_str());
  std::printf("windows (L=%d, H=%d, stride=%d): %" PRId64 " train / %" PRId64 " test\n",
              config.model.lookback, config.model.horizon, config.data.stride, train_windows,
              test_windows);
  std::printf("bundle: %s (digest %s)\n", out_path.c_str(), file_digest(out_path).c_str());
}

void cmd_train(const std::string& bundle_path, const std::string& checkpoint_path,
               const std::string& report_path, RunConfig config) {
  DatasetBundle bundle = load_bundle(bundle_path);
  TrainedModel trained = train_on_bundle(bundle, config);

  save_checkpoint(trained.model, bundle.stats, bundle.train.target_name, &trained.optimizer,
                  config_digest_of(config), checkpoint_path);
  {
    std::ofstream report_out(report_path);
    if (!report_out) throw DataError("cannot write train report to " + report_path);
    report_out << "# tool: " << kToolVersion << "\n";
    report_out << "# config_digest: " << config_digest_of(config) << "\n";
    report_out << format_train_report(trained.report);
  }

  std::printf("epochs: %zu, best epoch %d (val mse %.6g), stop: %s\n",
              trained.report.epochs.size(), trained.report.best_epoch,
              trained.report.best_val_mse, trained.report.stop_reason.c_str());
  std::printf("checkpoint: %s (digest %s)\n", checkpoint_path.c_str(),
              file_digest(checkpoint_path).c_str());
  std::printf("report: %s\n", report_path.c_str());
}

void cmd_evaluate(const std::string& bundle_path, const std::string& checkpoint_path,
                  const std::string& out_path, RunConfig config) {
  DatasetBundle bundle = load_bundle(bundle_path);
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  if (loaded.stats_digest != stats_digest(bundle.stats)) {
    throw ConfigError("checkpoint was trained against different normalization stats (digest " +
                      loaded.stats_digest + ") than this bundle (" + stats_digest(bundle.stats) +
                      ")");
  }
  MetricsReport report = evaluate_on_bundle(bundle, loaded.model, config);
  write_metrics_report(report, config_digest_of(config), out_path);
  std::printf("origins: %zu, points: %" PRId64 "\n", report.origins.size(), report.n_points);
  std::printf("mae_norm: %.10g\nmape_norm: %.10g\nmspe_norm: %.10g\nmae_raw: %.10g\n",
              report.mae_norm, report.mape_norm, report.mspe_norm, report.mae_raw);
  std::printf("report: %s\n", out_path.c_str());
}

void cmd_predict(const std::string& checkpoint_path, const std::string& csv_path,
                 const std::string& origin, const std::string& out_path, RunConfig config) {
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  const ModelConfig& mc = loaded.model.config();
  const std::int64_t origin_hour = hours_since_epoch(parse_datetime(origin));

  LoadResult raw = load_csv(csv_path, loaded.stats.variables, config.data.timestamp_column);
  HourlySeries hourly = aggregate_hourly(raw, loaded.target_name);
  HourlySeries normalized =
      apply_normalization(impute_missing(hourly, loaded.stats), loaded.stats);

  const std::int64_t have_start = normalized.start_hour;
  const std::int64_t have_end = normalized.start_hour + normalized.hours();  // exclusive
  const std::int64_t need_start = origin_hour - mc.lookback;
  if (need_start < have_start || origin_hour > have_end) {
    throw ConfigError("origin " + origin + " needs " + std::to_string(mc.lookback) +
                      " hours of history [" + format_hour(need_start) + ", " +
                      format_hour(origin_hour - 1) + "], CSV covers [" + format_hour(have_start) +
                      ", " + format_hour(have_end - 1) + "]");
  }

  WindowSample sample;
  sample.origin_hour = origin_hour;
  const int target = normalized.target_index();
  const int s = static_cast<int>(need_start - have_start);
  for (int v = 0; v < normalized.var_count(); ++v) {
    if (v == target) continue;
    sample.lookback.emplace_back(
        normalized.matrix[static_cast<std::size_t>(v)].begin() + s,
        normalized.matrix[static_cast<std::size_t>(v)].begin() + s + mc.lookback);
  }
  for (int t = 0; t < mc.lookback; ++t) {
    sample.time_features.push_back(time_features_of_hour(need_start + t));
  }
  sample.target.assign(static_cast<std::size_t>(mc.horizon), 0.0);

  const std::vector<double> prediction = loaded.model.predict(sample);
  const VariableStats& tv = loaded.stats.for_variable(loaded.target_name);

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write forecast to " + out_path);
  out.precision(17);
  out << "# tool: " << kToolVersion << "\n";
  out << "# config_digest: " << config_digest_of(config) << "\n";
  out << "timestamp,predicted_power_normalized,predicted_power_raw\n";
  for (int h = 0; h < mc.horizon; ++h) {
    out << format_hour(origin_hour + h) << "," << prediction[static_cast<std::size_t>(h)] << ","
        << denormalize_value(prediction[static_cast<std::size_t>(h)], tv) << "\n";
  }
  std::printf("forecast: %s (%d hours from %s)\n", out_path.c_str(), mc.horizon,
              format_hour(origin_hour).c_str());
}

void cmd_sweep(const std::string& bundle_path, const std::string& out_dir, RunConfig config) {
  if (config.sweep_grid.empty()) {
    throw ConfigError("sweep requires at least one axis (sweep.grid or --grid)");
  }
  DatasetBundle bundle = load_bundle(bundle_path);
  fs::create_directories(out_dir);

  const auto& axes = config.sweep_grid;
  std::size_t cells = 1;
  for (const auto& [key, values] : axes) cells *= values.size();

  struct Row {
    std::size_t cell;
    std::string settings;
    std::uint64_t seed;
    MetricsReport report;
    bool cached;
  };
  std::vector<Row> rows;

  std::vector<std::size_t> index(axes.size(), 0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    RunConfig cell_config = config;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      apply_setting(cell_config, axes[a].first + "=" + axes[a].second[index[a]]);
    }
    validate_run_config(cell_config);
    const std::string settings = settings_of_cell(axes, index);

    for (std::uint64_t seed : config.seeds) {
      cell_config.train.seed = seed;
      const std::string report_path =
          (fs::path(out_dir) / ("metrics_cell" + std::to_string(cell) + "_seed" +
                                std::to_string(seed) + ".txt"))
              .string();
      bool cached = false;
      MetricsReport report;
      if (fs::exists(report_path)) {
        try {
          report = parse_metrics_report(report_path);
          report.verify_self_consistency();
          cached = true;
        } catch (const Error&) {
          cached = false;  // recompute a malformed or stale cell
        }
      }
      if (!cached) {
        TrainedModel trained = train_on_bundle(bundle, cell_config);
        report = evaluate_on_bundle(bundle, trained.model, cell_config);
        write_metrics_report(report, config_digest_of(cell_config), report_path);
      }
      std::printf("cell %zu [%s] seed %" PRIu64 "%s: mae=%.6g mape=%.6g mspe=%.6g mse=%.6g\n",
                  cell, settings.c_str(), seed, cached ? " (cached)" : "", report.mae_norm,
                  report.mape_norm, report.mspe_norm, report.mse_norm);
      rows.push_back(Row{cell, settings, seed, std::move(report), cached});
    }
    // advance the odometer, last axis fastest
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++index[a] < axes[a].second.size()) break;
      index[a] = 0;
    }
  }

  const std::string summary_path = (fs::path(out_dir) / "summary.csv").string();
  std::ofstream summary(summary_path);
  if (!summary) throw DataError("cannot write sweep summary to " + summary_path);
  summary.precision(17);
  summary << "# tool: " << kToolVersion << "\n";
  summary << "# config_digest: " << config_digest_of(config) << "\n";
  summary << "cell,settings,seed,mae_norm,mape_norm,mspe_norm,mse_norm,mae_raw\n";
  for (const Row& r : rows) {
    summary << r.cell << "," << r.settings << "," << r.seed << "," << r.report.mae_norm << ","
            << r.report.mape_norm << "," << r.report.mspe_norm << "," << r.report.mse_norm << ","
            << r.report.mae_raw << "\n";
  }
  // per-cell mean and range (max - min) across seeds
  for (std::size_t cell = 0; cell < cells; ++cell) {
    struct Agg {
      double sum = 0, lo = 0, hi = 0;
      void add(double v, bool first) {
        sum += v;
        lo = first ? v : std::min(lo, v);
        hi = first ? v : std::max(hi, v);
      }
    };
    Agg mae, mape, mspe, mse, mae_raw;
    int n = 0;
    std::string settings;
    for (const Row& r : rows) {
      if (r.cell != cell) continue;
      const bool first = n == 0;
      mae.add(r.report.mae_norm, first);
      mape.add(r.report.mape_norm, first);
      mspe.add(r.report.mspe_norm, first);
      mse.add(r.report.mse_norm, first);
      mae_raw.add(r.report.mae_raw, first);
      settings = r.settings;
      ++n;
    }
    if (n == 0) continue;
    summary << cell << "," << settings << ",mean," << mae.sum / n << "," << mape.sum / n << ","
            << mspe.sum / n << "," << mse.sum / n << "," << mae_raw.sum / n << "\n";
    summary << cell << "," << settings << ",range," << mae.hi - mae.lo << "," << mape.hi - mape.lo
            << "," << mspe.hi - mspe.lo << "," << mse.hi - mse.lo << "," << mae_raw.hi - mae_raw.lo
            << "\n";
  }
  std::printf("summary: %s\n", summary_path.c_str());
}

}  // namespace dewp::cli
