#pragma once

#include <cstdint>
#include <filesystem>

#include "rest/dataset.hpp"
#include "rest/kv_config.hpp"
#include "rest/model.hpp"

namespace rest {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;
/// Bumped whenever the meaning of a config key or a tensor layout changes.
inline constexpr std::uint32_t kConfigSchemaVersion = 1;

/// Everything needed to reproduce predictions: parameters, the config that produced them, and id maps.
struct Checkpoint {
  ModelConfig model_config;
  ModelParameters params;
  /// Snapshot of the full run configuration (training, data, ...).
  KeyValueConfig run_config;
  IdMap users;
  IdMap items;
  std::int64_t step = 0;
  double validation_metric = 0.0;

  RestModel model() const { return RestModel(model_config, params); }
};

/// Binary container:
///   magic "RESTCKPT", u32 format version, u32 config schema version,
///   length-prefixed config text (model + run + meta keys),
///   u32 tensor count, then per tensor: name, rows, cols, raw little-endian doubles,
///   then the two id maps as length-prefixed string lists.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws ValidationError on a bad magic, a format or schema version mismatch, or tensor shape mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rest
