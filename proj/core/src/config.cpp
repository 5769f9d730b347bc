#include "dewp/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dewp/errors.hpp"
#include "dewp/serialize.hpp"

namespace dewp {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  long v = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw ConfigError("config key '" + key + "' expects an integer, got '" + value + "'");
  }
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  unsigned long long v = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw ConfigError("config key '" + key + "' expects an unsigned integer, got '" + value + "'");
  }
  return static_cast<std::uint64_t>(v);
}

double parse_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ConfigError("config key '" + key + "' expects a number, got '" + value + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(s);
  while (std::getline(ss, cell, sep)) {
    cell = trim(cell);
    if (!cell.empty()) out.push_back(cell);
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::string, std::vector<std::string>>> parse_sweep_grid(
    const std::string& text) {
  std::vector<std::pair<std::string, std::vector<std::string>>> grid;
  for (const std::string& entry : split(text, ';')) {
    const std::size_t eq = entry.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("sweep grid entry '" + entry + "' is not key=v1,v2,...");
    }
    std::string key = trim(entry.substr(0, eq));
    std::vector<std::string> values = split(entry.substr(eq + 1), ',');
    if (key.empty() || values.empty()) {
      throw ConfigError("sweep grid entry '" + entry + "' has no values");
    }
    grid.emplace_back(std::move(key), std::move(values));
  }
  return grid;
}

void apply_setting(RunConfig& config, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("setting '" + assignment + "' is not section.key=value");
  }
  const std::string dotted = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const std::size_t dot = dotted.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("setting key '" + dotted + "' lacks a section prefix");
  }
  const std::string section = dotted.substr(0, dot);
  const std::string key = dotted.substr(dot + 1);

  if (section == "model") {
    if (key == "lookback") config.model.lookback = parse_int(dotted, value);
    else if (key == "horizon") config.model.horizon = parse_int(dotted, value);
    else if (key == "d_v") config.model.d_v = parse_int(dotted, value);
    else if (key == "stacks") config.model.stacks = parse_int(dotted, value);
    else if (key == "conv_channels") config.model.conv_channels = parse_int(dotted, value);
    else if (key == "kernel_size") config.model.kernel_size = parse_int(dotted, value);
    else if (key == "heads") config.model.heads = parse_int(dotted, value);
    else if (key == "embed_dim_month") config.model.embed_dim_month = parse_int(dotted, value);
    else if (key == "embed_dim_weekday") config.model.embed_dim_weekday = parse_int(dotted, value);
    else if (key == "embed_dim_hour") config.model.embed_dim_hour = parse_int(dotted, value);
    else throw ConfigError("unknown config key 'model." + key + "'");
  } else if (section == "train") {
    if (key == "batch_size") config.train.batch_size = parse_int(dotted, value);
    else if (key == "learning_rate") config.train.learning_rate = parse_double(dotted, value);
    else if (key == "beta1") config.train.beta1 = parse_double(dotted, value);
    else if (key == "beta2") config.train.beta2 = parse_double(dotted, value);
    else if (key == "eps") config.train.eps = parse_double(dotted, value);
    else if (key == "max_epochs") config.train.max_epochs = parse_int(dotted, value);
    else if (key == "patience") config.train.patience = parse_int(dotted, value);
    else if (key == "clip_norm") config.train.clip_norm = parse_double(dotted, value);
    else if (key == "seed") config.train.seed = parse_u64(dotted, value);
    else throw ConfigError("unknown config key 'train." + key + "'");
  } else if (section == "data") {
    if (key == "timestamp_column") config.data.timestamp_column = value;
    else if (key == "variables") config.data.variables = split(value, ',');
    else if (key == "target") config.data.target = value;
    else if (key == "split_boundary") config.data.split_boundary = value;
    else if (key == "stride") config.data.stride = parse_int(dotted, value);
    else throw ConfigError("unknown config key 'data." + key + "'");
  } else if (section == "eval") {
    if (key == "start") config.eval.start = value;
    else if (key == "end") config.eval.end = value;
    else if (key == "interval") config.eval.interval = parse_int(dotted, value);
    else if (key == "floor") config.eval.floor = parse_double(dotted, value);
    else throw ConfigError("unknown config key 'eval." + key + "'");
  } else if (section == "run") {
    if (key == "seeds") {
      config.seeds.clear();
      for (const std::string& s : split(value, ',')) config.seeds.push_back(parse_u64(dotted, s));
    } else {
      throw ConfigError("unknown config key 'run." + key + "'");
    }
  } else if (section == "sweep") {
    if (key == "grid") config.sweep_grid = parse_sweep_grid(value);
    else throw ConfigError("unknown config key 'sweep." + key + "'");
  } else {
    throw ConfigError("unknown config section '" + section + "'");
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig config;
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    }
    if (section.empty()) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": key outside any [section]");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    apply_setting(config, section + "." + key + "=" + value);
  }
  return config;
}

void validate_run_config(const RunConfig& config) {
  ModelConfig m = config.model;
  if (m.d == 0) m.d = 1;  // d is derived from data later; validate the rest
  m.validate();
  config.train.validate();
  if (config.data.stride < 1) throw ConfigError("data.stride must be >= 1");
  if (!config.data.target.empty() && !config.data.variables.empty()) {
    bool found = false;
    for (const auto& v : config.data.variables) {
      if (v == config.data.target) found = true;
    }
    if (!found) {
      throw ConfigError("data.target '" + config.data.target + "' is not in data.variables");
    }
  }
  if (!config.data.split_boundary.empty()) parse_datetime(config.data.split_boundary);
  if (!config.eval.start.empty()) parse_datetime(config.eval.start);
  if (!config.eval.end.empty()) parse_datetime(config.eval.end);
  if (config.eval.interval < 0) throw ConfigError("eval.interval must be >= 0");
  if (!(config.eval.floor > 0.0)) throw ConfigError("eval.floor must be positive");
  if (config.seeds.empty()) throw ConfigError("run.seeds must list at least one seed");
}

std::string canonical_config_text(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "[model]\n";
  os << "lookback = " << c.model.lookback << "\n";
  os << "horizon = " << c.model.horizon << "\n";
  os << "d_v = " << c.model.d_v << "\n";
  os << "stacks = " << c.model.stacks << "\n";
  os << "conv_channels = " << c.model.conv_channels << "\n";
  os << "kernel_size = " << c.model.kernel_size << "\n";
  os << "heads = " << c.model.heads << "\n";
  os << "embed_dim_month = " << c.model.embed_dim_month << "\n";
  os << "embed_dim_weekday = " << c.model.embed_dim_weekday << "\n";
  os << "embed_dim_hour = " << c.model.embed_dim_hour << "\n";
  os << "[train]\n";
  os << "batch_size = " << c.train.batch_size << "\n";
  os << "learning_rate = " << c.train.learning_rate << "\n";
  os << "beta1 = " << c.train.beta1 << "\n";
  os << "beta2 = " << c.train.beta2 << "\n";
  os << "eps = " << c.train.eps << "\n";
  os << "max_epochs = " << c.train.max_epochs << "\n";
  os << "patience = " << c.train.patience << "\n";
  os << "clip_norm = " << c.train.clip_norm << "\n";
  os << "seed = " << c.train.seed << "\n";
  os << "[data]\n";
  os << "timestamp_column = " << c.data.timestamp_column << "\n";
  os << "variables = ";
  for (std::size_t i = 0; i < c.data.variables.size(); ++i) {
    if (i) os << ",";
    os << c.data.variables[i];
  }
  os << "\n";
  os << "target = " << c.data.target << "\n";
  os << "split_boundary = " << c.data.split_boundary << "\n";
  os << "stride = " << c.data.stride << "\n";
  os << "[eval]\n";
  os << "start = " << c.eval.start << "\n";
  os << "end = " << c.eval.end << "\n";
  os << "interval = " << c.eval.interval << "\n";
  os << "floor = " << c.eval.floor << "\n";
  os << "[run]\n";
  os << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    if (i) os << ",";
    os << c.seeds[i];
  }
  os << "\n";
  if (!c.sweep_grid.empty()) {
    os << "[sweep]\n";
    os << "grid = ";
    for (std::size_t a = 0; a < c.sweep_grid.size(); ++a) {
      if (a) os << ";";
      os << c.sweep_grid[a].first << "=";
      for (std::size_t v = 0; v < c.sweep_grid[a].second.size(); ++v) {
        if (v) os << ",";
        os << c.sweep_grid[a].second[v];
      }
    }
    os << "\n";
  }
  return os.str();
}

std::string config_digest_of(const RunConfig& config) {
  const std::string text = canonical_config_text(config);
  return std::string("cfg-") +
         [&] {
           char buf[9];
           std::snprintf(buf, sizeof(buf), "%08x", bytes_crc32(text.data(), text.size()));
           return std::string(buf);
         }();
}

}  // namespace dewp
