#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rest/dataset.hpp"
#include "rest/graph_store.hpp"
#include "rest/model.hpp"

namespace rest {

/// How interactions are grouped into heatmap rows.
struct Grouping {
  enum class Kind { kTimeWindow, kDate, kLabels };
  Kind kind = Kind::kTimeWindow;
  /// Window width in timestamp units for kTimeWindow.
  std::int64_t window = 86400;
  /// One label per interaction for kLabels.
  std::vector<std::string> labels;
  /// kLabels only: groups to emit in this order; empty means order of first appearance.
  std::vector<std::string> order;

  /// Parses "window:N", "date" or "labels".
  static Grouping parse(const std::string& text);
};

/// One row per non-empty group; each block of `categories` columns is one-hot.
struct StrategyHeatmap {
  int blocks = 0;
  int categories = 0;
  std::vector<std::string> row_labels;
  std::vector<std::vector<std::uint8_t>> rows;
  std::vector<std::size_t> group_sizes;
  /// Requested groups with no member interactions; they get no row.
  std::vector<std::string> omitted;

  std::string to_csv() const;
  void save_csv(const std::filesystem::path& path) const;
  /// Each cell is `cell` pixels square; 1 is yellow (253, 231, 37) and 0 purple (68, 1, 84).
  void save_png(const std::filesystem::path& path, int cell = 8) const;
};

/// Noiseless hard codes (e = 1, argmax per block) of every interaction, aggregated per group by the
/// per-block modal category (ties to the smaller category).
StrategyHeatmap build_heatmap(const RestModel& model, const GraphStore& graph,
                              const std::vector<InteractionRecord>& interactions, const Grouping& grouping);

/// Same aggregation over precomputed per-interaction codes.
StrategyHeatmap heatmap_from_codes(const std::vector<std::vector<int>>& codes, const std::vector<std::string>& group_of,
                                   const std::vector<std::string>& order, int blocks, int categories);

/// Writes an 8-bit RGB PNG. `rgb` holds width * height * 3 bytes, row-major.
void write_png(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace rest
