#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>
#include <vector>

#include "rest/dataset.hpp"
#include "rest/errors.hpp"
#include "rest/rng.hpp"

namespace rest {

EvalNegatives sample_eval_negatives(const std::vector<const Dataset*>& history, const Dataset& eval,
                                    std::size_t n_neg, std::uint64_t seed) {
  if (eval.feedback_kind != FeedbackKind::kImplicit)
    throw ValidationError("eval negatives are only defined for implicit feedback");
  if (n_neg == 0) throw ValidationError("n_neg must be positive");

  std::vector<std::vector<ItemId>> seen(static_cast<std::size_t>(eval.num_users));
  auto add = [&](const Dataset& ds) {
    for (const auto& r : ds.interactions) seen[static_cast<std::size_t>(r.user)].push_back(r.item);
  };
  for (const auto* ds : history) add(*ds);
  add(eval);
  for (auto& items : seen) {
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
  }

  EvalNegatives out;
  Rng rng(seed);
  const auto num_items = static_cast<std::size_t>(eval.num_items);
  for (std::size_t idx = 0; idx < eval.interactions.size(); ++idx) {
    const auto& rec = eval.interactions[idx];
    const auto& hist = seen[static_cast<std::size_t>(rec.user)];
    const std::size_t available = num_items - hist.size();
    if (available == 0) {
      ++out.skipped;
      continue;
    }
    CandidateList list;
    list.eval_index = idx;
    list.user = rec.user;
    list.positive = rec.item;
    auto interacted = [&](ItemId v) { return std::binary_search(hist.begin(), hist.end(), v); };

    if (available <= n_neg || available < 4 * n_neg) {
      // Dense regime: enumerate the complement and take a seeded prefix.
      std::vector<ItemId> pool;
      pool.reserve(available);
      for (std::size_t v = 0; v < num_items; ++v)
        if (!interacted(static_cast<ItemId>(v))) pool.push_back(static_cast<ItemId>(v));
      rng.shuffle(std::span<ItemId>(pool));
      if (pool.size() > n_neg) pool.resize(n_neg);
      if (pool.size() < n_neg) ++out.short_lists;
      list.items = std::move(pool);
    } else {
      std::unordered_set<ItemId> picked;
      while (list.items.size() < n_neg) {
        auto v = static_cast<ItemId>(rng.index(num_items));
        if (interacted(v) || !picked.insert(v).second) continue;
        list.items.push_back(v);
      }
    }
    list.items.push_back(rec.item);
    rng.shuffle(std::span<ItemId>(list.items));
    out.lists.push_back(std::move(list));
  }
  return out;
}

EvalNegatives sample_eval_negatives(const Dataset& train, const Dataset& eval, std::size_t n_neg,
                                    std::uint64_t seed) {
  return sample_eval_negatives(std::vector<const Dataset*>{&train}, eval, n_neg, seed);
}

void save_negatives(const EvalNegatives& negatives, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "# skipped=" << negatives.skipped << " short=" << negatives.short_lists << '\n';
  for (const auto& l : negatives.lists) {
    out << l.eval_index << '\t' << l.user << '\t' << l.positive << '\t';
    for (std::size_t i = 0; i < l.items.size(); ++i) out << (i ? "," : "") << l.items[i];
    out << '\n';
  }
}

EvalNegatives load_negatives(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  EvalNegatives out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    CandidateList l;
    std::string items;
    if (!(ss >> l.eval_index >> l.user >> l.positive >> items))
      throw ParseError(path.string(), line_no, "expected eval_index<TAB>user<TAB>positive<TAB>items");
    std::istringstream is(items);
    std::string tok;
    while (std::getline(is, tok, ',')) l.items.push_back(static_cast<ItemId>(std::stol(tok)));
    out.lists.push_back(std::move(l));
  }
  return out;
}

}  // namespace rest
