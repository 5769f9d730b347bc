#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dewp/data.hpp"
#include "dewp/model.hpp"
#include "dewp/train.hpp"

namespace dewp {

/// On-disk container shared by dataset bundles and model checkpoints:
///   magic "DEWPBIN\1" | u32 container version | u32 kind | u64 payload size
///   | payload | u32 CRC-32 of the payload.
/// The payload is a length-prefixed JSON meta string followed by named
/// double arrays in a fixed order. The CRC is verified before any parsing,
/// so a corrupt file is rejected whole.
struct Archive {
  std::uint32_t kind = 0;
  std::string meta_json;
  std::vector<std::pair<std::string, std::vector<double>>> arrays;

  const std::vector<double>& array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

inline constexpr std::uint32_t kBundleKind = 1;
inline constexpr std::uint32_t kCheckpointKind = 2;

void write_archive(const Archive& archive, const std::string& path);
Archive read_archive(const std::string& path, std::uint32_t expected_kind);

std::uint32_t bytes_crc32(const void* data, std::size_t size);
/// CRC-32 of a file's full contents, hex-encoded; the artifact digest.
std::string file_digest(const std::string& path);
/// Digest of normalization stats, used to pair checkpoints with bundles.
std::string stats_digest(const NormalizationStats& stats);

inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr const char* kToolVersion = "dewp 0.1.0";

/// Preprocessed dataset: normalized and imputed hourly splits plus the
/// statistics and boundary that produced them.
struct DatasetBundle {
  HourlySeries train;
  HourlySeries test;
  NormalizationStats stats;
  std::int64_t boundary_hour = 0;
  std::string config_text;    // effective configuration echoed for provenance
  std::string config_digest;

  /// Train and test concatenated back into one contiguous series, so that
  /// rolling-origin lookbacks may reach left of the boundary.
  HourlySeries full_series() const;
};

void save_bundle(const DatasetBundle& bundle, const std::string& path);
DatasetBundle load_bundle(const std::string& path);

struct LoadedCheckpoint {
  DewpModel model;
  NormalizationStats stats;
  std::string target_name;
  bool has_optimizer = false;
  OptimizerState optimizer;
  std::string stats_digest;
  std::string config_digest;
};

/// optimizer may be null. The checkpoint embeds the model config, the
/// normalization stats (with digest), and every parameter bit-exactly.
void save_checkpoint(const DewpModel& model, const NormalizationStats& stats,
                     const std::string& target_name, const OptimizerState* optimizer,
                     const std::string& config_digest, const std::string& path);
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Throws ConfigError when the checkpoint's config differs from `expected`.
void ensure_config_matches(const DewpModel& loaded, const ModelConfig& expected);

}  // namespace dewp
