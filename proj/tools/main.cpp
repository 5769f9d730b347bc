#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "commands.hpp"
#include "dewp/errors.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> settings;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

dewp::RunConfig resolve_config(const CommonArgs& args) {
  dewp::RunConfig config;
  if (!args.config_path.empty()) config = dewp::load_run_config(args.config_path);
  for (const std::string& s : args.settings) dewp::apply_setting(config, s);
  if (args.seed_given) {
    config.train.seed = args.seed;
    config.seeds = {args.seed};
  }
  dewp::validate_run_config(config);
  return config;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Key-value configuration file");
  cmd->add_option("--set", args.settings, "Override one key: section.key=value")
      ->take_all()
      ->expected(-1);
  cmd->add_option("--seed", args.seed, "Random seed (overrides train.seed and run.seeds)")
      ->each([&args](const std::string&) { args.seed_given = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DEWP wind-power forecasting toolkit"};
  app.require_subcommand(1);

  CommonArgs common;

  auto* preprocess = app.add_subcommand("preprocess", "Raw turbine CSV -> dataset bundle");
  std::string csv_path, out_path;
  preprocess->add_option("--csv", csv_path, "Raw CSV input")->required();
  preprocess->add_option("--out", out_path, "Bundle output path")->required();
  add_common(preprocess, common);

  auto* train_cmd = app.add_subcommand("train", "Train the model on a bundle");
  std::string bundle_path, checkpoint_path, report_path;
  train_cmd->add_option("--bundle", bundle_path, "Dataset bundle")->required();
  train_cmd->add_option("--out", checkpoint_path, "Checkpoint output path")->required();
  train_cmd->add_option("--report", report_path, "Training report path (default: <out>.report.txt)");
  add_common(train_cmd, common);

  auto* evaluate = app.add_subcommand("evaluate", "Rolling-origin evaluation of a checkpoint");
  std::string eval_bundle, eval_checkpoint, eval_out;
  evaluate->add_option("--bundle", eval_bundle, "Dataset bundle")->required();
  evaluate->add_option("--checkpoint", eval_checkpoint, "Model checkpoint")->required();
  evaluate->add_option("--out", eval_out, "Metrics report output path")->required();
  add_common(evaluate, common);

  auto* predict = app.add_subcommand("predict", "Forecast H hours from a raw CSV");
  std::string pred_checkpoint, pred_csv, pred_origin, pred_out;
  predict->add_option("--checkpoint", pred_checkpoint, "Model checkpoint")->required();
  predict->add_option("--csv", pred_csv, "Recent raw observations CSV")->required();
  predict->add_option("--origin", pred_origin, "Forecast origin (ISO timestamp)")->required();
  predict->add_option("--out", pred_out, "Forecast CSV output path")->required();
  add_common(predict, common);

  auto* sweep = app.add_subcommand("sweep", "Train/evaluate over a parameter grid");
  std::string sweep_bundle, sweep_out;
  std::vector<std::string> grid_flags;
  sweep->add_option("--bundle", sweep_bundle, "Dataset bundle")->required();
  sweep->add_option("--out", sweep_out, "Output directory for cell reports")->required();
  sweep->add_option("--grid", grid_flags, "Sweep axis: section.key=v1,v2,...")
      ->take_all()
      ->expected(-1);
  add_common(sweep, common);

  CLI11_PARSE(app, argc, argv);

  try {
    dewp::RunConfig config = resolve_config(common);
    if (preprocess->parsed()) {
      dewp::cli::cmd_preprocess(csv_path, out_path, config);
    } else if (train_cmd->parsed()) {
      if (report_path.empty()) report_path = checkpoint_path + ".report.txt";
      dewp::cli::cmd_train(bundle_path, checkpoint_path, report_path, config);
    } else if (evaluate->parsed()) {
      dewp::cli::cmd_evaluate(eval_bundle, eval_checkpoint, eval_out, config);
    } else if (predict->parsed()) {
      dewp::cli::cmd_predict(pred_checkpoint, pred_csv, pred_origin, pred_out, config);
    } else if (sweep->parsed()) {
      for (const std::string& g : grid_flags) {
        auto axes = dewp::parse_sweep_grid(g);
        config.sweep_grid.insert(config.sweep_grid.end(), axes.begin(), axes.end());
      }
      dewp::cli::cmd_sweep(sweep_bundle, sweep_out, config);
    }
  } catch (const dewp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const dewp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const dewp::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
