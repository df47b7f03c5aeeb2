#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rest/dataset.hpp"
#include "rest/kv_config.hpp"
#include "rest/model.hpp"
#include "rest/training.hpp"

namespace rest {

/// Everything a command needs, read from a flat key-value file. See README for the key reference.
struct RunConfig {
  // data.*
  std::filesystem::path interactions;
  std::optional<std::filesystem::path> social;
  TsvFormat format = TsvFormat::kExplicit;
  int rating_levels = 5;

  SplitSpec split;

  // eval.*
  std::size_t eval_negatives = 99;
  std::vector<int> eval_ks = {5, 10, 20};
  std::uint64_t eval_seed = 11;

  // graph.*
  int beta = 2;
  std::size_t cap_per_user = 0;  // 0 means |C(u)|
  std::uint64_t pool_seed = 7;

  // model.* (sizes of the id spaces come from the prepared data)
  ModelConfig model;

  TrainConfig train;

  // run.*
  std::filesystem::path out_dir = "run";
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  // viz.*
  std::string viz_grouping = "window:10000";
  std::string viz_split = "test";
  std::optional<std::filesystem::path> viz_labels;
  int viz_cell = 8;

  // scm.*
  std::optional<std::filesystem::path> scm_spec;

  void validate() const;
  /// validate() plus existence of the input files.
  void validate_inputs() const;

  KeyValueConfig to_kv() const;
  /// Throws ValidationError on unknown keys or bad values.
  static RunConfig from_kv(const KeyValueConfig& kv);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::filesystem::path prepared_dir() const { return out_dir / "prepared"; }
};

}  // namespace rest
