#include <cmath>
#include <fstream>
#include <numeric>
#include <vector>

#include "rest/dataset.hpp"
#include "rest/errors.hpp"
#include "rest/rng.hpp"

namespace rest {

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0) || !(val_fraction > 0.0) || !(test_fraction > 0.0))
    throw ValidationError("split fractions must be strictly positive");
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
    throw ValidationError("split fractions must sum to 1");
}

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  SplitSizes sizes;
  sizes.val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.val_fraction + 0.5));
  sizes.test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * spec.test_fraction + 0.5));
  if (sizes.val + sizes.test >= n) {
    sizes.val = sizes.test = 0;
    sizes.train = 0;
    return sizes;
  }
  sizes.train = n - sizes.val - sizes.test;
  return sizes;
}

DatasetSplit split_dataset(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = ds.interactions.size();
  DatasetSplit out;
  out.target_sizes = split_sizes(n, spec);
  if (out.target_sizes.train == 0) throw ValidationError("split fractions leave the training split empty");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(order));

  const auto& sz = out.target_sizes;
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sz.train));
  std::vector<std::size_t> val(order.begin() + static_cast<std::ptrdiff_t>(sz.train),
                               order.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.val));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(sz.train + sz.val), order.end());

  std::vector<char> user_seen(static_cast<std::size_t>(ds.num_users), 0);
  std::vector<char> item_seen(static_cast<std::size_t>(ds.num_items), 0);
  for (auto idx : train) {
    user_seen[static_cast<std::size_t>(ds.interactions[idx].user)] = 1;
    item_seen[static_cast<std::size_t>(ds.interactions[idx].item)] = 1;
  }
  auto repair = [&](std::vector<std::size_t>& part) {
    std::vector<std::size_t> kept;
    kept.reserve(part.size());
    for (auto idx : part) {
      const auto& r = ds.interactions[idx];
      const auto u = static_cast<std::size_t>(r.user), i = static_cast<std::size_t>(r.item);
      if (user_seen[u] && item_seen[i]) {
        kept.push_back(idx);
      } else {
        user_seen[u] = item_seen[i] = 1;
        train.push_back(idx);
        ++out.moved_to_train;
      }
    }
    part = std::move(kept);
  };
  repair(val);
  repair(test);

  auto materialize = [&](const std::vector<std::size_t>& idxs) {
    std::vector<InteractionRecord> recs;
    recs.reserve(idxs.size());
    for (auto idx : idxs) recs.push_back(ds.interactions[idx]);
    return ds.with_interactions(std::move(recs));
  };
  out.train = materialize(train);
  out.val = materialize(val);
  out.test = materialize(test);
  out.train_indices = std::move(train);
  out.val_indices = std::move(val);
  out.test_indices = std::move(test);
  return out;
}

void DatasetSplit::save_manifest(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "# split\tindex\n";
  for (auto i : train_indices) out << "train\t" << i << '\n';
  for (auto i : val_indices) out << "val\t" << i << '\n';
  for (auto i : test_indices) out << "test\t" << i << '\n';
}

}  // namespace rest
