#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dewp/datetime.hpp"

namespace dewp {

/// One raw CSV row: a minute-resolution timestamp plus one optional value
/// per schema variable (unparseable or empty cells are missing).
struct RawRecord {
  std::int64_t minutes = 0;  // minutes since epoch
  std::vector<std::optional<double>> values;
};

struct LoadResult {
  std::vector<RawRecord> records;  // nondecreasing timestamps, duplicates resolved
  std::vector<std::string> variables;
  int duplicate_count = 0;
};

/// Reads a comma-separated file with a header row naming `timestamp_column`
/// plus every schema variable (extra columns are ignored). Rows with the same
/// timestamp collapse to the last one in file order.
LoadResult load_csv(const std::string& path, const std::vector<std::string>& schema,
                    const std::string& timestamp_column);

/// Dense hourly grid. Missing cells are NaN until impute_missing runs.
struct HourlySeries {
  std::int64_t start_hour = 0;
  std::vector<std::string> variables;
  std::string target_name;
  std::vector<std::vector<double>> matrix;  // [variable][hour]

  int hours() const { return matrix.empty() ? 0 : static_cast<int>(matrix.front().size()); }
  int var_count() const { return static_cast<int>(variables.size()); }
  /// Index of a variable name; throws ConfigError when absent.
  int var_index(const std::string& name) const;
  int target_index() const { return var_index(target_name); }
  bool has_missing() const;
};

HourlySeries aggregate_hourly(const LoadResult& loaded, const std::string& target_name);

struct VariableStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

/// Per-variable min/max/mean fitted on one split only; `fitted_on` records
/// which. Downstream stages never refit.
struct NormalizationStats {
  std::vector<std::string> variables;
  std::vector<VariableStats> stats;
  std::string fitted_on;

  const VariableStats& for_variable(const std::string& name) const;
};

/// Fits min/max/mean per variable over the slice, skipping missing cells.
/// A variable with no observed values at all is a data error.
NormalizationStats fit_normalization(const HourlySeries& train_slice, const std::string& fitted_on);

/// Replaces every missing cell with the fitted mean of its variable.
HourlySeries impute_missing(const HourlySeries& series, const NormalizationStats& stats);

/// x -> (x - min) / (max - min); constant variables map to 0.5.
HourlySeries apply_normalization(const HourlySeries& series, const NormalizationStats& stats);
HourlySeries invert_normalization(const HourlySeries& series, const NormalizationStats& stats);

double normalize_value(double x, const VariableStats& vs);
double denormalize_value(double x, const VariableStats& vs);

/// Train covers hours strictly before the boundary, test hours at/after it.
/// The boundary must lie within [start, start + hours] (either side may be
/// empty at the extremes).
std::pair<HourlySeries, HourlySeries> split_by_timestamp(const HourlySeries& series,
                                                         std::int64_t boundary_hour);

/// One training example. The lookback block holds the feature variables only
/// (never the power target); the target holds the next H hours of power.
struct WindowSample {
  std::int64_t origin_hour = 0;  // first forecast hour
  std::vector<std::vector<double>> lookback;  // [feature][L]
  std::vector<TimeFeatures> time_features;    // length L
  std::vector<double> target;                 // length H
};

/// Number of windows over a series of T hours: floor((T-L-H)/stride) + 1,
/// or zero when T < L + H.
std::int64_t window_count(std::int64_t total_hours, int lookback, int horizon, int stride);

std::vector<WindowSample> make_windows(const HourlySeries& series, int lookback, int horizon,
                                       int stride);

/// Feature variable names = series variables minus the target, in order.
std::vector<std::string> feature_names(const HourlySeries& series);

}  // namespace dewp
