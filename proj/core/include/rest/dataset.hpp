#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rest {

using UserId = std::int32_t;
using ItemId = std::int32_t;

enum class FeedbackKind { kExplicit, kImplicit };

std::string to_string(FeedbackKind kind);
FeedbackKind feedback_kind_from_string(const std::string& text);

/// One logged (or counterfactual) interaction.
struct InteractionRecord {
  UserId user = 0;
  ItemId item = 0;
  int rating = 1;
  bool exposed = true;
  std::optional<std::int64_t> timestamp;

  bool operator==(const InteractionRecord&) const = default;
};

/// Bidirectional map between original (string) ids and dense indices.
class IdMap {
 public:
  std::int32_t intern(const std::string& original);
  std::optional<std::int32_t> find(const std::string& original) const;
  const std::string& original(std::int32_t dense) const { return names_.at(static_cast<std::size_t>(dense)); }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  /// One `dense<TAB>original` line per id.
  void save(const std::filesystem::path& path) const;
  static IdMap load(const std::filesystem::path& path);

  bool operator==(const IdMap& other) const { return names_ == other.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct Dataset {
  std::vector<InteractionRecord> interactions;
  /// Undirected social graph stored with both orientations present.
  std::vector<std::pair<UserId, UserId>> social_edges;
  std::int32_t num_users = 0;
  std::int32_t num_items = 0;
  FeedbackKind feedback_kind = FeedbackKind::kExplicit;
  int rating_levels = 5;
  IdMap users;
  IdMap items;

  /// Throws ValidationError when an invariant does not hold.
  void validate() const;

  /// Copy with the same id spaces and social graph but the given interactions.
  Dataset with_interactions(std::vector<InteractionRecord> records) const;
};

enum class TsvFormat { kExplicit, kImplicit };

TsvFormat tsv_format_from_string(const std::string& text);

struct LoadOptions {
  std::filesystem::path interactions;
  std::optional<std::filesystem::path> social;
  TsvFormat format = TsvFormat::kExplicit;
  /// Explicit ratings must lie in [1, rating_levels].
  int rating_levels = 5;
};

struct LoadSummary {
  std::size_t lines_read = 0;
  std::size_t duplicates_replaced = 0;
  std::size_t social_edges_dropped = 0;  // endpoints unknown, or self loops
};

/// Parses interaction and social TSV dumps into a densely re-indexed dataset.
Dataset load_dataset(const LoadOptions& options, LoadSummary* summary = nullptr);

/// Same as load_dataset but reading from in-memory text; `source` names the input in errors.
Dataset parse_dataset(const std::string& interactions_tsv, const std::optional<std::string>& social_tsv,
                      TsvFormat format, int rating_levels, LoadSummary* summary = nullptr,
                      const std::string& source = "<interactions>");

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 42;

  void validate() const;
};

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};

/// Target sizes for `n` records before the no-new-ids repair.
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

struct DatasetSplit {
  Dataset train, val, test;
  /// Indices into the source dataset's interactions, in split order.
  std::vector<std::size_t> train_indices, val_indices, test_indices;
  SplitSizes target_sizes;
  std::size_t moved_to_train = 0;

  /// One `split<TAB>index` line per record.
  void save_manifest(const std::filesystem::path& path) const;
};

DatasetSplit split_dataset(const Dataset& ds, const SplitSpec& spec);

struct CandidateList {
  std::size_t eval_index = 0;  // index into the eval dataset's interactions
  UserId user = 0;
  ItemId positive = 0;
  std::vector<ItemId> items;  // negatives plus the positive, shuffled
};

struct EvalNegatives {
  std::vector<CandidateList> lists;
  std::size_t skipped = 0;       // users who interacted with every item
  std::size_t short_lists = 0;   // fewer than n_neg non-interacted items were available
};

/// For each eval positive, draw `n_neg` items the user never interacted with in any of `history`.
EvalNegatives sample_eval_negatives(const std::vector<const Dataset*>& history, const Dataset& eval,
                                    std::size_t n_neg, std::uint64_t seed);
EvalNegatives sample_eval_negatives(const Dataset& train, const Dataset& eval, std::size_t n_neg,
                                    std::uint64_t seed);

/// `eval_index<TAB>user<TAB>positive<TAB>item,item,...` per line.
void save_negatives(const EvalNegatives& negatives, const std::filesystem::path& path);
EvalNegatives load_negatives(const std::filesystem::path& path);

/// Dense-id persistence used between `prepare` and later commands.
void save_interactions_tsv(const Dataset& ds, const std::filesystem::path& path);
void save_social_tsv(const Dataset& ds, const std::filesystem::path& path);
void save_prepared(const Dataset& ds, const std::filesystem::path& dir, const std::string& name);
Dataset load_prepared(const std::filesystem::path& dir, const std::string& name);

}  // namespace rest
