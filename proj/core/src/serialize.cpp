#include "dewp/serialize.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dewp/errors.hpp"

namespace dewp {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'D', 'E', 'W', 'P', 'B', 'I', 'N', '\x01'};
constexpr std::uint32_t kContainerVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  out.append(buf, 8);
}

class Cursor {
 public:
  Cursor(const std::string& bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  std::uint32_t u32() {
    std::uint32_t v;
    take(&v, 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    take(&v, 8);
    return v;
  }
  std::string str(std::size_t len) {
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  std::vector<double> doubles(std::size_t count) {
    need(count * sizeof(double));
    std::vector<double> out(count);
    std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(double));
    pos_ += count * sizeof(double);
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw DataError("truncated file: " + context_);
  }
  void take(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  const std::string& bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08x", v);
  return buf;
}

json stats_to_json(const NormalizationStats& stats) {
  json j;
  j["fitted_on"] = stats.fitted_on;
  j["variables"] = stats.variables;
  std::vector<double> mn, mx, mean;
  for (const VariableStats& vs : stats.stats) {
    mn.push_back(vs.min);
    mx.push_back(vs.max);
    mean.push_back(vs.mean);
  }
  j["min"] = mn;
  j["max"] = mx;
  j["mean"] = mean;
  return j;
}

NormalizationStats stats_from_json(const json& j) {
  NormalizationStats stats;
  stats.fitted_on = j.at("fitted_on").get<std::string>();
  stats.variables = j.at("variables").get<std::vector<std::string>>();
  auto mn = j.at("min").get<std::vector<double>>();
  auto mx = j.at("max").get<std::vector<double>>();
  auto mean = j.at("mean").get<std::vector<double>>();
  if (mn.size() != stats.variables.size() || mx.size() != mn.size() || mean.size() != mn.size()) {
    throw DataError("normalization stats arrays disagree in length");
  }
  for (std::size_t i = 0; i < mn.size(); ++i) {
    stats.stats.push_back(VariableStats{mn[i], mx[i], mean[i]});
  }
  return stats;
}

json config_to_json(const ModelConfig& c) {
  return json{{"d", c.d},
              {"lookback", c.lookback},
              {"horizon", c.horizon},
              {"d_v", c.d_v},
              {"stacks", c.stacks},
              {"conv_channels", c.conv_channels},
              {"kernel_size", c.kernel_size},
              {"heads", c.heads},
              {"embed_dim_month", c.embed_dim_month},
              {"embed_dim_weekday", c.embed_dim_weekday},
              {"embed_dim_hour", c.embed_dim_hour}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.d = j.at("d").get<int>();
  c.lookback = j.at("lookback").get<int>();
  c.horizon = j.at("horizon").get<int>();
  c.d_v = j.at("d_v").get<int>();
  c.stacks = j.at("stacks").get<int>();
  c.conv_channels = j.at("conv_channels").get<int>();
  c.kernel_size = j.at("kernel_size").get<int>();
  c.heads = j.at("heads").get<int>();
  c.embed_dim_month = j.at("embed_dim_month").get<int>();
  c.embed_dim_weekday = j.at("embed_dim_weekday").get<int>();
  c.embed_dim_hour = j.at("embed_dim_hour").get<int>();
  return c;
}

}  // namespace

const std::vector<double>& Archive::array(const std::string& name) const {
  for (const auto& [n, v] : arrays) {
    if (n == name) return v;
  }
  throw DataError("archive is missing array '" + name + "'");
}

bool Archive::has_array(const std::string& name) const {
  for (const auto& [n, v] : arrays) {
    if (n == name) return true;
  }
  return false;
}

std::uint32_t bytes_crc32(const void* data, std::size_t size) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(size)));
}

void write_archive(const Archive& archive, const std::string& path) {
  std::string payload;
  put_u32(payload, static_cast<std::uint32_t>(archive.meta_json.size()));
  payload += archive.meta_json;
  put_u32(payload, static_cast<std::uint32_t>(archive.arrays.size()));
  for (const auto& [name, values] : archive.arrays) {
    put_u32(payload, static_cast<std::uint32_t>(name.size()));
    payload += name;
    put_u64(payload, values.size());
    payload.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  }

  std::string file;
  file.append(kMagic, sizeof(kMagic));
  put_u32(file, kContainerVersion);
  put_u32(file, archive.kind);
  put_u64(file, payload.size());
  file += payload;
  put_u32(file, bytes_crc32(payload.data(), payload.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write file: " + path);
  out.write(file.data(), static_cast<std::streamsize>(file.size()));
  if (!out) throw DataError("write failed: " + path);
}

Archive read_archive(const std::string& path, std::uint32_t expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string file = buf.str();

  if (file.size() < sizeof(kMagic) + 4 + 4 + 8 + 4) throw DataError("truncated file: " + path);
  if (std::memcmp(file.data(), kMagic, sizeof(kMagic)) != 0) {
    throw DataError("not a dewp archive (bad magic): " + path);
  }
  std::size_t pos = sizeof(kMagic);
  std::uint32_t container_version, kind;
  std::uint64_t payload_size;
  std::memcpy(&container_version, file.data() + pos, 4);
  pos += 4;
  std::memcpy(&kind, file.data() + pos, 4);
  pos += 4;
  std::memcpy(&payload_size, file.data() + pos, 8);
  pos += 8;
  if (container_version != kContainerVersion) {
    throw DataError("unsupported container version " + std::to_string(container_version) + " in " +
                    path);
  }
  if (kind != expected_kind) {
    throw DataError("archive kind mismatch in " + path + ": expected " +
                    std::to_string(expected_kind) + ", found " + std::to_string(kind));
  }
  if (file.size() != sizeof(kMagic) + 16 + payload_size + 4) {
    throw DataError("truncated file: " + path);
  }
  // Verify the checksum before touching the payload.
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, file.data() + pos + payload_size, 4);
  const std::uint32_t actual_crc = bytes_crc32(file.data() + pos, payload_size);
  if (stored_crc != actual_crc) {
    throw DataError("checksum mismatch in " + path + " (stored " + hex32(stored_crc) +
                    ", computed " + hex32(actual_crc) + ")");
  }

  std::string payload = file.substr(pos, payload_size);
  Cursor cur(payload, path);
  Archive archive;
  archive.kind = kind;
  const std::uint32_t meta_len = cur.u32();
  archive.meta_json = cur.str(meta_len);
  const std::uint32_t array_count = cur.u32();
  for (std::uint32_t i = 0; i < array_count; ++i) {
    const std::uint32_t name_len = cur.u32();
    std::string name = cur.str(name_len);
    const std::uint64_t count = cur.u64();
    archive.arrays.emplace_back(std::move(name), cur.doubles(count));
  }
  if (!cur.done()) throw DataError("trailing bytes in payload: " + path);
  return archive;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string bytes = buf.str();
  return hex32(bytes_crc32(bytes.data(), bytes.size()));
}

std::string stats_digest(const NormalizationStats& stats) {
  const std::string canon = stats_to_json(stats).dump();
  return hex32(bytes_crc32(canon.data(), canon.size()));
}

HourlySeries DatasetBundle::full_series() const {
  if (train.hours() == 0) return test;
  if (test.hours() == 0) return train;
  HourlySeries full = train;
  for (std::size_t v = 0; v < full.matrix.size(); ++v) {
    full.matrix[v].insert(full.matrix[v].end(), test.matrix[v].begin(), test.matrix[v].end());
  }
  return full;
}

namespace {

json series_meta(const HourlySeries& s) {
  return json{{"start_hour", s.start_hour},
              {"hours", s.hours()},
              {"variables", s.variables},
              {"target", s.target_name}};
}

void series_arrays(const HourlySeries& s, const std::string& prefix, Archive& archive) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(s.var_count()) * static_cast<std::size_t>(s.hours()));
  for (const auto& row : s.matrix) flat.insert(flat.end(), row.begin(), row.end());
  archive.arrays.emplace_back(prefix + ".matrix", std::move(flat));
}

HourlySeries series_from(const json& meta, const std::vector<double>& flat) {
  HourlySeries s;
  s.start_hour = meta.at("start_hour").get<std::int64_t>();
  s.variables = meta.at("variables").get<std::vector<std::string>>();
  s.target_name = meta.at("target").get<std::string>();
  const int hours = meta.at("hours").get<int>();
  if (flat.size() != s.variables.size() * static_cast<std::size_t>(hours)) {
    throw DataError("series matrix size does not match its metadata");
  }
  for (std::size_t v = 0; v < s.variables.size(); ++v) {
    s.matrix.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(v * hours),
                          flat.begin() + static_cast<std::ptrdiff_t>((v + 1) * hours));
  }
  return s;
}

}  // namespace

void save_bundle(const DatasetBundle& bundle, const std::string& path) {
  Archive archive;
  archive.kind = kBundleKind;
  json meta;
  meta["format"] = "dewp-bundle";
  meta["version"] = kBundleVersion;
  meta["tool"] = kToolVersion;
  meta["boundary_hour"] = bundle.boundary_hour;
  meta["config_digest"] = bundle.config_digest;
  meta["config_text"] = bundle.config_text;
  meta["train"] = series_meta(bundle.train);
  meta["test"] = series_meta(bundle.test);
  meta["stats"] = stats_to_json(bundle.stats);
  archive.meta_json = meta.dump();
  series_arrays(bundle.train, "train", archive);
  series_arrays(bundle.test, "test", archive);
  write_archive(archive, path);
}

DatasetBundle load_bundle(const std::string& path) {
  Archive archive = read_archive(path, kBundleKind);
  json meta;
  try {
    meta = json::parse(archive.meta_json);
  } catch (const json::exception& e) {
    throw DataError("bundle metadata is not valid JSON: " + path);
  }
  if (meta.value("format", "") != "dewp-bundle") throw DataError("not a bundle: " + path);
  const auto version = meta.at("version").get<std::uint32_t>();
  if (version != kBundleVersion) {
    throw DataError("bundle version mismatch: file has " + std::to_string(version) +
                    ", tool supports " + std::to_string(kBundleVersion));
  }
  DatasetBundle bundle;
  bundle.boundary_hour = meta.at("boundary_hour").get<std::int64_t>();
  bundle.config_digest = meta.value("config_digest", "");
  bundle.config_text = meta.value("config_text", "");
  bundle.train = series_from(meta.at("train"), archive.array("train.matrix"));
  bundle.test = series_from(meta.at("test"), archive.array("test.matrix"));
  bundle.stats = stats_from_json(meta.at("stats"));
  return bundle;
}

void save_checkpoint(const DewpModel& model, const NormalizationStats& stats,
                     const std::string& target_name, const OptimizerState* optimizer,
                     const std::string& config_digest, const std::string& path) {
  Archive archive;
  archive.kind = kCheckpointKind;
  json meta;
  meta["format"] = "dewp-checkpoint";
  meta["version"] = kCheckpointVersion;
  meta["tool"] = kToolVersion;
  meta["model_config"] = config_to_json(model.config());
  meta["stats"] = stats_to_json(stats);
  meta["stats_digest"] = stats_digest(stats);
  meta["target"] = target_name;
  meta["config_digest"] = config_digest;
  meta["optimizer"] = optimizer != nullptr;
  if (optimizer != nullptr) meta["optimizer_t"] = optimizer->t;
  archive.meta_json = meta.dump();

  auto named = model.named_parameters();
  for (const auto& [name, tensor] : named) {
    auto v = tensor.values();
    archive.arrays.emplace_back("param." + name, std::vector<double>(v.begin(), v.end()));
  }
  if (optimizer != nullptr) {
    if (optimizer->m.size() != named.size()) {
      throw ContractError("optimizer state does not match the model's parameter list");
    }
    for (std::size_t i = 0; i < named.size(); ++i) {
      archive.arrays.emplace_back("adam.m." + named[i].first, optimizer->m[i]);
      archive.arrays.emplace_back("adam.v." + named[i].first, optimizer->v[i]);
    }
  }
  write_archive(archive, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  Archive archive = read_archive(path, kCheckpointKind);
  json meta;
  try {
    meta = json::parse(archive.meta_json);
  } catch (const json::exception&) {
    throw DataError("checkpoint metadata is not valid JSON: " + path);
  }
  if (meta.value("format", "") != "dewp-checkpoint") throw DataError("not a checkpoint: " + path);
  const auto version = meta.at("version").get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint version mismatch: file has " + std::to_string(version) +
                    ", tool supports " + std::to_string(kCheckpointVersion));
  }
  LoadedCheckpoint loaded;
  ModelConfig cfg = config_from_json(meta.at("model_config"));
  // Seed is irrelevant: every parameter is overwritten below.
  loaded.model = DewpModel(cfg, 0);
  loaded.stats = stats_from_json(meta.at("stats"));
  loaded.target_name = meta.value("target", "");
  loaded.stats_digest = meta.value("stats_digest", "");
  loaded.config_digest = meta.value("config_digest", "");

  auto named = loaded.model.named_parameters();
  for (auto& [name, tensor] : named) {
    const std::vector<double>& stored = archive.array("param." + name);
    if (stored.size() != static_cast<std::size_t>(tensor.numel())) {
      throw DataError("checkpoint parameter '" + name + "' has " + std::to_string(stored.size()) +
                      " values, model expects " + std::to_string(tensor.numel()));
    }
    auto dst = tensor.mutable_values();
    std::copy(stored.begin(), stored.end(), dst.begin());
  }
  loaded.has_optimizer = meta.value("optimizer", false);
  if (loaded.has_optimizer) {
    loaded.optimizer.t = meta.at("optimizer_t").get<std::int64_t>();
    for (const auto& [name, tensor] : named) {
      loaded.optimizer.m.push_back(archive.array("adam.m." + name));
      loaded.optimizer.v.push_back(archive.array("adam.v." + name));
    }
  }
  return loaded;
}

void ensure_config_matches(const DewpModel& loaded, const ModelConfig& expected) {
  if (!(loaded.config() == expected)) {
    throw ConfigError("checkpoint model config does not match the expected config (e.g. d_v " +
                      std::to_string(loaded.config().d_v) + " vs " + std::to_string(expected.d_v) +
                      ")");
  }
}

}  // namespace dewp
