#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dewp/eval.hpp"
#include "dewp/model.hpp"
#include "dewp/train.hpp"

namespace dewp {

/// Everything a command needs, assembled from a key-value config file plus
/// command-line overrides. Unknown keys are rejected rather than ignored.
struct RunConfig {
  ModelConfig model;  // model.d is derived from the data, not configured
  TrainConfig train;

  struct DataSection {
    std::string timestamp_column = "timestamp";
    std::vector<std::string> variables;  // includes the target
    std::string target;
    std::string split_boundary;  // ISO timestamp; required by preprocess
    int stride = 1;
  } data;

  struct EvalSection {
    std::string start;  // default: split boundary
    std::string end;    // default: last evaluable hour
    int interval = 0;   // 0 = horizon
    double floor = kDefaultMetricFloor;
  } eval;

  std::vector<std::uint64_t> seeds = {1};

  /// Cross-product sweep axes: (dotted key, candidate values).
  std::vector<std::pair<std::string, std::vector<std::string>>> sweep_grid;
};

/// Parses "[section]" headers and "key = value" lines; '#' starts a comment.
RunConfig load_run_config(const std::string& path);

/// Applies one "section.key=value" assignment (the --set flag and the sweep
/// machinery both funnel through here). Throws ConfigError on unknown keys
/// or unparseable values.
void apply_setting(RunConfig& config, const std::string& assignment);

/// Rejects any invalid combination before compute begins.
void validate_run_config(const RunConfig& config);

/// Deterministic echo of the effective configuration; embedded into output
/// artifacts for provenance.
std::string canonical_config_text(const RunConfig& config);
std::string config_digest_of(const RunConfig& config);

/// "model.stacks=1,4;train.learning_rate=1e-3,1e-4" -> sweep axes.
std::vector<std::pair<std::string, std::vector<std::string>>> parse_sweep_grid(
    const std::string& text);

}  // namespace dewp
