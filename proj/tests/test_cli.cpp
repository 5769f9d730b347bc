#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "dewp/eval.hpp"
#include "dewp/model.hpp"
#include "dewp/serialize.hpp"
#include "support/synthetic.hpp"
#include "support/testutil.hpp"

using namespace dewp;
using dewp::testing::read_file;
using dewp::testing::TempDir;
using dewp::testing::write_file;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string output;
};

CmdResult run_cli(const TempDir& dir, const std::string& args) {
  const std::string log = dir.file("cmd_output.log");
  const std::string cmd = std::string(DEWP_CLI_PATH) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  CmdResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = read_file(log);
  return result;
}

// small-model flags shared by train/evaluate/sweep invocations
const std::string kModelFlags =
    " --set model.lookback=16 --set model.horizon=8 --set model.d_v=4 --set model.stacks=1"
    " --set model.conv_channels=4 --set model.heads=2 --set model.embed_dim_month=2"
    " --set model.embed_dim_weekday=2 --set model.embed_dim_hour=2"
    " --set train.batch_size=64 --set train.learning_rate=3e-3 --set train.max_epochs=2"
    " --set train.patience=2";

const std::string kDataFlags =
    " --set data.variables=speed,direction,temperature,power --set data.target=power"
    " --set data.split_boundary=2016-01-28T00:00";

std::string make_raw_csv(const TempDir& dir, int hours = 800) {
  dewp::testing::SyntheticSpec spec;
  spec.hours = hours;
  const std::string path = dir.file("raw.csv");
  write_file(path, dewp::testing::synthetic_csv(spec));
  return path;
}

std::string make_bundle(const TempDir& dir, const std::string& csv) {
  const std::string bundle = dir.file("data.bundle");
  CmdResult r = run_cli(dir, "preprocess --csv " + csv + " --out " + bundle + kDataFlags +
                                 " --set model.lookback=16 --set model.horizon=8");
  REQUIRE(r.exit_code == 0);
  return bundle;
}

}  // namespace

TEST_CASE("preprocess writes a deterministic bundle and reports counts") {
  TempDir dir("cli_pre");
  const std::string csv = make_raw_csv(dir);
  const std::string a = dir.file("a.bundle");
  const std::string b = dir.file("b.bundle");
  CmdResult r1 = run_cli(dir, "preprocess --csv " + csv + " --out " + a + kDataFlags);
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.output.find("rows: 4800") != std::string::npos);
  CHECK(r1.output.find("windows") != std::string::npos);
  CmdResult r2 = run_cli(dir, "preprocess --csv " + csv + " --out " + b + kDataFlags);
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(a) == read_file(b));
}

TEST_CASE("preprocess rejects a schema variable missing from the CSV") {
  TempDir dir("cli_schema");
  write_file(dir.file("raw.csv"), "timestamp,speed,power\n2016-01-01 00:00,1,2\n");
  CmdResult r = run_cli(dir, "preprocess --csv " + dir.file("raw.csv") + " --out " +
                                 dir.file("x.bundle") +
                                 " --set data.variables=speed,nacelle_angle,power"
                                 " --set data.target=power"
                                 " --set data.split_boundary=2016-01-01T00:00");
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("nacelle_angle") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected before any compute") {
  TempDir dir("cli_badkey");
  CmdResult r = run_cli(dir, "preprocess --csv nowhere.csv --out x --set model.lookbak=24");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("lookbak") != std::string::npos);
}

TEST_CASE("train writes checkpoint and report; identical seeds give identical checkpoints") {
  TempDir dir("cli_train");
  const std::string csv = make_raw_csv(dir);
  const std::string bundle = make_bundle(dir, csv);

  const std::string c1 = dir.file("m1.ckpt");
  const std::string c2 = dir.file("m2.ckpt");
  CmdResult r1 = run_cli(dir, "train --bundle " + bundle + " --out " + c1 + kModelFlags + " --seed 9");
  REQUIRE(r1.exit_code == 0);
  CHECK(std::filesystem::exists(c1));
  CHECK(std::filesystem::exists(c1 + ".report.txt"));
  CmdResult r2 = run_cli(dir, "train --bundle " + bundle + " --out " + c2 + kModelFlags + " --seed 9");
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(c1) == read_file(c2));

  // a different seed must change the parameters
  const std::string c3 = dir.file("m3.ckpt");
  run_cli(dir, "train --bundle " + bundle + " --out " + c3 + kModelFlags + " --seed 10");
  CHECK(read_file(c1) != read_file(c3));
}

TEST_CASE("invalid heads/d_v divisibility fails before training starts") {
  TempDir dir("cli_div");
  const std::string csv = make_raw_csv(dir);
  const std::string bundle = make_bundle(dir, csv);
  CmdResult r = run_cli(dir, "train --bundle " + bundle + " --out " + dir.file("x.ckpt") +
                                 kModelFlags + " --set model.heads=3");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("divisible") != std::string::npos);
}

TEST_CASE("evaluate emits a self-consistent report and predict matches it bit-exactly") {
  TempDir dir("cli_eval");
  const std::string csv = make_raw_csv(dir);
  const std::string bundle = make_bundle(dir, csv);
  const std::string ckpt = dir.file("model.ckpt");
  REQUIRE(run_cli(dir, "train --bundle " + bundle + " --out " + ckpt + kModelFlags + " --seed 4")
              .exit_code == 0);

  const std::string metrics = dir.file("metrics.txt");
  CmdResult ev = run_cli(dir, "evaluate --bundle " + bundle + " --checkpoint " + ckpt + " --out " +
                                  metrics + kModelFlags);
  REQUIRE(ev.exit_code == 0);

  MetricsReport parsed = parse_metrics_report(metrics);
  parsed.verify_self_consistency();  // aggregates recomputable from rows
  REQUIRE(!parsed.origins.empty());

  // predict at the first evaluated origin must reproduce the stored row
  const std::string origin = format_hour(parsed.origins.front().origin_hour);
  const std::string forecast = dir.file("forecast.csv");
  CmdResult pr = run_cli(dir, "predict --checkpoint " + ckpt + " --csv " + csv + " --origin " +
                                  origin + " --out " + forecast);
  REQUIRE(pr.exit_code == 0);
  const std::string text = read_file(forecast);
  // two provenance comments + header + H rows
  CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 1 + 8);
  CHECK(text.find("timestamp,predicted_power_normalized,predicted_power_raw\n") !=
        std::string::npos);

  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line) && line.rfind("timestamp", 0) != 0) {
  }
  for (int h = 0; h < 8; ++h) {
    REQUIRE(std::getline(lines, line));
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = line.find(',', c1 + 1);
    const double got = std::strtod(line.substr(c1 + 1, c2 - c1 - 1).c_str(), nullptr);
    CHECK(got == parsed.origins.front().y_pred[static_cast<std::size_t>(h)]);
  }
}

TEST_CASE("a constant-output stub checkpoint on constant power scores zero metrics") {
  TempDir dir("cli_oracle");
  // constant power column -> normalized target is exactly 0.5 everywhere
  dewp::testing::SyntheticSpec spec;
  spec.hours = 800;
  HourlySeries series = dewp::testing::synthetic_series(spec);
  std::ostringstream csv;
  csv.precision(17);
  csv << "timestamp,speed,direction,temperature,power\n";
  for (int t = 0; t < series.hours(); ++t) {
    csv << format_hour(series.start_hour + t);
    for (int v = 0; v < 3; ++v) csv << "," << series.matrix[static_cast<std::size_t>(v)][static_cast<std::size_t>(t)];
    csv << "," << 700.0 << "\n";
  }
  write_file(dir.file("raw.csv"), csv.str());
  const std::string bundle = make_bundle(dir, dir.file("raw.csv"));

  // model that always outputs exactly 0.5 per horizon step
  DatasetBundle loaded = load_bundle(bundle);
  ModelConfig mc;
  mc.d = 3;
  mc.lookback = 16;
  mc.horizon = 8;
  mc.d_v = 4;
  mc.stacks = 1;
  mc.conv_channels = 4;
  mc.heads = 2;
  mc.embed_dim_month = 2;
  mc.embed_dim_weekday = 2;
  mc.embed_dim_hour = 2;
  DewpModel stub(mc, 1);
  for (auto& [name, p] : stub.named_parameters()) {
    for (double& v : p.mutable_values()) v = 0.0;
  }
  for (double& v : stub.mutable_stacks().front().b_o.mutable_values()) v = 0.5;
  const std::string ckpt = dir.file("stub.ckpt");
  save_checkpoint(stub, loaded.stats, loaded.train.target_name, nullptr, "cfg-stub", ckpt);

  const std::string metrics = dir.file("metrics.txt");
  CmdResult ev = run_cli(dir, "evaluate --bundle " + bundle + " --checkpoint " + ckpt + " --out " +
                                  metrics + kModelFlags);
  REQUIRE(ev.exit_code == 0);
  MetricsReport report = parse_metrics_report(metrics);
  CHECK(report.mae_norm == 0.0);
  CHECK(report.mape_norm == 0.0);
  CHECK(report.mspe_norm == 0.0);
}

TEST_CASE("evaluating against a bundle with different stats is a compatibility error") {
  TempDir dir("cli_compat");
  const std::string csv = make_raw_csv(dir);
  const std::string bundle_a = make_bundle(dir, csv);
  const std::string ckpt = dir.file("model.ckpt");
  REQUIRE(run_cli(dir, "train --bundle " + bundle_a + " --out " + ckpt + kModelFlags).exit_code ==
          0);

  // different split boundary -> different training slice -> different stats
  const std::string bundle_b = dir.file("other.bundle");
  REQUIRE(run_cli(dir, "preprocess --csv " + csv + " --out " + bundle_b +
                           " --set data.variables=speed,direction,temperature,power"
                           " --set data.target=power"
                           " --set data.split_boundary=2016-01-20T00:00")
              .exit_code == 0);
  CmdResult r = run_cli(dir, "evaluate --bundle " + bundle_b + " --checkpoint " + ckpt + " --out " +
                                 dir.file("m.txt") + kModelFlags);
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("normalization stats") != std::string::npos);
}

TEST_CASE("predict rejects an origin without enough history") {
  TempDir dir("cli_hist");
  const std::string csv = make_raw_csv(dir);
  const std::string bundle = make_bundle(dir, csv);
  const std::string ckpt = dir.file("model.ckpt");
  REQUIRE(run_cli(dir, "train --bundle " + bundle + " --out " + ckpt + kModelFlags).exit_code == 0);
  CmdResult r = run_cli(dir, "predict --checkpoint " + ckpt + " --csv " + csv +
                                 " --origin 2016-01-01T04:00 --out " + dir.file("f.csv"));
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("history") != std::string::npos);
}

TEST_CASE("sweep produces one report per cell and resumes from finished cells") {
  TempDir dir("cli_sweep");
  const std::string csv = make_raw_csv(dir);
  const std::string bundle = make_bundle(dir, csv);
  const std::string out = dir.file("sweepdir");

  const std::string cmd = "sweep --bundle " + bundle + " --out " + out +
                          " --grid model.stacks=1,2" + kModelFlags + " --seed 3";
  CmdResult r1 = run_cli(dir, cmd);
  REQUIRE(r1.exit_code == 0);
  CHECK(std::filesystem::exists(out + "/metrics_cell0_seed3.txt"));
  CHECK(std::filesystem::exists(out + "/metrics_cell1_seed3.txt"));
  CHECK(std::filesystem::exists(out + "/summary.csv"));
  CHECK(r1.output.find("(cached)") == std::string::npos);

  // both cells must be complete, parseable reports
  parse_metrics_report(out + "/metrics_cell0_seed3.txt").verify_self_consistency();
  parse_metrics_report(out + "/metrics_cell1_seed3.txt").verify_self_consistency();

  CmdResult r2 = run_cli(dir, cmd);
  REQUIRE(r2.exit_code == 0);
  CHECK(r2.output.find("(cached)") != std::string::npos);

  // cached rerun reproduces the same summary
  const std::string summary1 = read_file(out + "/summary.csv");
  CmdResult r3 = run_cli(dir, cmd);
  REQUIRE(r3.exit_code == 0);
  CHECK(read_file(out + "/summary.csv") == summary1);
}

TEST_CASE("sweep without a grid is a config error") {
  TempDir dir("cli_nogrid");
  CmdResult r = run_cli(dir, "sweep --bundle nothing.bundle --out " + dir.file("x"));
  CHECK(r.exit_code == 2);
}
