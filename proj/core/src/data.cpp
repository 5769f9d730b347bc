#include "dewp/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "dewp/errors.hpp"

namespace dewp {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::optional<double> parse_cell(const std::string& raw) {
  std::string s = trim(raw);
  if (s.empty()) return std::nullopt;
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || std::isnan(v)) return std::nullopt;
  return v;
}

}  // namespace

LoadResult load_csv(const std::string& path, const std::vector<std::string>& schema,
                    const std::string& timestamp_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);
  std::string header;
  if (!std::getline(in, header)) throw DataError("empty CSV file: " + path);
  std::vector<std::string> columns = split_csv_line(header);
  for (auto& c : columns) c = trim(c);

  auto find_col = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
  };

  const int ts_col = find_col(timestamp_column);
  if (ts_col < 0) {
    throw DataError("CSV " + path + " is missing the timestamp column '" + timestamp_column + "'");
  }
  std::vector<int> var_cols;
  for (const auto& name : schema) {
    int c = find_col(name);
    if (c < 0) throw DataError("CSV " + path + " is missing the variable column '" + name + "'");
    var_cols.push_back(c);
  }

  std::vector<RawRecord> rows;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (static_cast<int>(cells.size()) <= ts_col) {
      throw DataError(path + ":" + std::to_string(lineno) + ": row has no timestamp cell");
    }
    RawRecord rec;
    DateTime dt;
    try {
      dt = parse_datetime(trim(cells[static_cast<std::size_t>(ts_col)]));
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    rec.minutes = minutes_since_epoch(dt);
    rec.values.reserve(schema.size());
    for (int c : var_cols) {
      if (c < static_cast<int>(cells.size())) {
        rec.values.push_back(parse_cell(cells[static_cast<std::size_t>(c)]));
      } else {
        rec.values.push_back(std::nullopt);
      }
    }
    rows.push_back(std::move(rec));
  }
  if (rows.empty()) throw DataError("CSV " + path + " has a header but no data rows");

  // Stable sort keeps file order within equal timestamps, so "last wins" is
  // deterministic regardless of input order.
  std::stable_sort(rows.begin(), rows.end(),
                   [](const RawRecord& a, const RawRecord& b) { return a.minutes < b.minutes; });
  LoadResult result;
  result.variables = schema;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i + 1 < rows.size() && rows[i + 1].minutes == rows[i].minutes) {
      ++result.duplicate_count;
      continue;
    }
    result.records.push_back(std::move(rows[i]));
  }
  return result;
}

int HourlySeries::var_index(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("variable '" + name + "' not present in series");
}

bool HourlySeries::has_missing() const {
  for (const auto& row : matrix) {
    for (double v : row) {
      if (std::isnan(v)) return true;
    }
  }
  return false;
}

HourlySeries aggregate_hourly(const LoadResult& loaded, const std::string& target_name) {
  if (loaded.records.empty()) throw DataError("aggregate_hourly: no records");
  const std::int64_t first_hour = loaded.records.front().minutes / 60;
  const std::int64_t last_hour = loaded.records.back().minutes / 60;
  const std::int64_t hours = last_hour - first_hour + 1;
  const std::size_t d = loaded.variables.size();

  HourlySeries series;
  series.start_hour = first_hour;
  series.variables = loaded.variables;
  series.target_name = target_name;
  series.matrix.assign(d, std::vector<double>(static_cast<std::size_t>(hours), kMissing));

  std::vector<std::vector<double>> sums(d, std::vector<double>(static_cast<std::size_t>(hours), 0.0));
  std::vector<std::vector<int>> counts(d, std::vector<int>(static_cast<std::size_t>(hours), 0));
  for (const RawRecord& rec : loaded.records) {
    const std::size_t h = static_cast<std::size_t>(rec.minutes / 60 - first_hour);
    for (std::size_t v = 0; v < d; ++v) {
      if (rec.values[v].has_value()) {
        sums[v][h] += *rec.values[v];
        counts[v][h] += 1;
      }
    }
  }
  for (std::size_t v = 0; v < d; ++v) {
    for (std::size_t h = 0; h < static_cast<std::size_t>(hours); ++h) {
      if (counts[v][h] > 0) series.matrix[v][h] = sums[v][h] / counts[v][h];
    }
  }
  series.var_index(target_name);  // validate
  return series;
}

const VariableStats& NormalizationStats::for_variable(const std::string& name) const {
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i] == name) return stats[i];
  }
  throw ConfigError("normalization stats do not cover variable '" + name + "'");
}

NormalizationStats fit_normalization(const HourlySeries& train_slice,
                                     const std::string& fitted_on) {
  if (train_slice.hours() == 0) throw DataError("fit_normalization: empty training slice");
  NormalizationStats out;
  out.variables = train_slice.variables;
  out.fitted_on = fitted_on;
  for (std::size_t v = 0; v < train_slice.variables.size(); ++v) {
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    std::int64_t n = 0;
    for (double x : train_slice.matrix[v]) {
      if (std::isnan(x)) continue;
      mn = std::min(mn, x);
      mx = std::max(mx, x);
      sum += x;
      ++n;
    }
    if (n == 0) {
      throw DataError("variable '" + train_slice.variables[v] +
                      "' has no observed values in the training slice");
    }
    out.stats.push_back(VariableStats{mn, mx, sum / static_cast<double>(n)});
  }
  return out;
}

HourlySeries impute_missing(const HourlySeries& series, const NormalizationStats& stats) {
  HourlySeries out = series;
  for (std::size_t v = 0; v < out.variables.size(); ++v) {
    const VariableStats& vs = stats.for_variable(out.variables[v]);
    for (double& x : out.matrix[v]) {
      if (std::isnan(x)) x = vs.mean;
    }
  }
  return out;
}

double normalize_value(double x, const VariableStats& vs) {
  const double range = vs.max - vs.min;
  if (range == 0.0) return 0.5;
  return (x - vs.min) / range;
}

double denormalize_value(double x, const VariableStats& vs) {
  return vs.min + x * (vs.max - vs.min);
}

HourlySeries apply_normalization(const HourlySeries& series, const NormalizationStats& stats) {
  HourlySeries out = series;
  for (std::size_t v = 0; v < out.variables.size(); ++v) {
    const VariableStats& vs = stats.for_variable(out.variables[v]);
    for (double& x : out.matrix[v]) x = normalize_value(x, vs);
  }
  return out;
}

HourlySeries invert_normalization(const HourlySeries& series, const NormalizationStats& stats) {
  HourlySeries out = series;
  for (std::size_t v = 0; v < out.variables.size(); ++v) {
    const VariableStats& vs = stats.for_variable(out.variables[v]);
    for (double& x : out.matrix[v]) x = denormalize_value(x, vs);
  }
  return out;
}

std::pair<HourlySeries, HourlySeries> split_by_timestamp(const HourlySeries& series,
                                                         std::int64_t boundary_hour) {
  const std::int64_t lo = series.start_hour;
  const std::int64_t hi = series.start_hour + series.hours();
  if (boundary_hour < lo || boundary_hour > hi) {
    throw ConfigError("split boundary " + format_hour(boundary_hour) + " outside series range [" +
                      format_hour(lo) + ", " + format_hour(hi) + "]");
  }
  const int cut = static_cast<int>(boundary_hour - lo);
  HourlySeries train, test;
  train.start_hour = lo;
  train.variables = series.variables;
  train.target_name = series.target_name;
  test.start_hour = boundary_hour;
  test.variables = series.variables;
  test.target_name = series.target_name;
  for (const auto& row : series.matrix) {
    train.matrix.emplace_back(row.begin(), row.begin() + cut);
    test.matrix.emplace_back(row.begin() + cut, row.end());
  }
  return {std::move(train), std::move(test)};
}

std::int64_t window_count(std::int64_t total_hours, int lookback, int horizon, int stride) {
  if (total_hours < lookback + horizon) return 0;
  return (total_hours - lookback - horizon) / stride + 1;
}

std::vector<std::string> feature_names(const HourlySeries& series) {
  std::vector<std::string> names;
  for (const auto& v : series.variables) {
    if (v != series.target_name) names.push_back(v);
  }
  return names;
}

std::vector<WindowSample> make_windows(const HourlySeries& series, int lookback, int horizon,
                                       int stride) {
  if (lookback < 1 || horizon < 1 || stride < 1) {
    throw ConfigError("make_windows requires lookback, horizon, stride >= 1");
  }
  const int target = series.target_index();
  std::vector<int> feature_rows;
  for (int v = 0; v < series.var_count(); ++v) {
    if (v != target) feature_rows.push_back(v);
  }
  const std::int64_t count = window_count(series.hours(), lookback, horizon, stride);
  std::vector<WindowSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (std::int64_t w = 0; w < count; ++w) {
    const int s = static_cast<int>(w * stride);
    WindowSample sample;
    sample.origin_hour = series.start_hour + s + lookback;
    sample.lookback.reserve(feature_rows.size());
    for (int v : feature_rows) {
      sample.lookback.emplace_back(series.matrix[static_cast<std::size_t>(v)].begin() + s,
                                   series.matrix[static_cast<std::size_t>(v)].begin() + s + lookback);
    }
    sample.time_features.reserve(static_cast<std::size_t>(lookback));
    for (int t = 0; t < lookback; ++t) {
      sample.time_features.push_back(time_features_of_hour(series.start_hour + s + t));
    }
    const auto& trow = series.matrix[static_cast<std::size_t>(target)];
    sample.target.assign(trow.begin() + s + lookback, trow.begin() + s + lookback + horizon);
    out.push_back(std::move(sample));
  }
  return out;
}

}  // namespace dewp
