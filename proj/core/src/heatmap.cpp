#include "rest/heatmap.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>

#include "rest/errors.hpp"

namespace rest {
namespace {

constexpr std::int64_t kMaxWindows = 100000;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::string utc_date(std::int64_t day) {
  const std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{day}}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

}  // namespace

Grouping Grouping::parse(const std::string& text) {
  Grouping g;
  if (text == "date") {
    g.kind = Kind::kDate;
  } else if (text == "labels") {
    g.kind = Kind::kLabels;
  } else if (text.rfind("window:", 0) == 0) {
    g.kind = Kind::kTimeWindow;
    try {
      std::size_t used = 0;
      g.window = std::stoll(text.substr(7), &used);
      if (used != text.size() - 7) throw std::invalid_argument("trailing text");
    } catch (const std::exception&) {
      throw ValidationError("bad window width in grouping '" + text + "'");
    }
    if (g.window < 1) throw ValidationError("window width must be positive");
  } else {
    throw ValidationError("grouping must be 'window:N', 'date' or 'labels', got '" + text + "'");
  }
  return g;
}

std::string StrategyHeatmap::to_csv() const {
  std::string out = "group";
  for (int j = 0; j < blocks * categories; ++j) out += "," + std::to_string(j);
  out += "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += row_labels[i];
    for (auto x : rows[i]) out += x ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

void StrategyHeatmap::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_csv();
}

void StrategyHeatmap::save_png(const std::filesystem::path& path, int cell) const {
  if (rows.empty()) throw ValidationError("heatmap has no rows to render");
  if (cell < 1) throw ValidationError("cell size must be positive");
  const int cols = blocks * categories;
  const int width = cols * cell;
  const int height = static_cast<int>(rows.size()) * cell;
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const bool on = rows[static_cast<std::size_t>(y / cell)][static_cast<std::size_t>(x / cell)] != 0;
      auto* px = &rgb[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3];
      px[0] = on ? 253 : 68;
      px[1] = on ? 231 : 1;
      px[2] = on ? 37 : 84;
    }
  write_png(path, width, height, rgb);
}

StrategyHeatmap heatmap_from_codes(const std::vector<std::vector<int>>& codes, const std::vector<std::string>& group_of,
                                   const std::vector<std::string>& order, int blocks, int categories) {
  if (codes.size() != group_of.size()) throw ValidationError("one group label per code is required");
  if (blocks < 1 || categories < 1) throw ValidationError("heatmap needs positive blocks and categories");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i].size() != static_cast<std::size_t>(blocks)) throw ValidationError("code length differs from blocks");
    members[group_of[i]].push_back(i);
  }
  std::vector<std::string> labels = order;
  if (labels.empty()) {
    std::map<std::string, bool> placed;
    for (const auto& g : group_of)
      if (!placed[g]) {
        placed[g] = true;
        labels.push_back(g);
      }
  }

  StrategyHeatmap hm;
  hm.blocks = blocks;
  hm.categories = categories;
  for (const auto& label : labels) {
    auto it = members.find(label);
    if (it == members.end()) {
      hm.omitted.push_back(label);
      continue;
    }
    std::vector<std::uint8_t> row(static_cast<std::size_t>(blocks * categories), 0);
    for (int b = 0; b < blocks; ++b) {
      std::vector<std::size_t> counts(static_cast<std::size_t>(categories), 0);
      for (auto i : it->second) {
        const int c = codes[i][static_cast<std::size_t>(b)];
        if (c < 0 || c >= categories) throw ValidationError("code category out of range");
        ++counts[static_cast<std::size_t>(c)];
      }
      const auto mode = std::max_element(counts.begin(), counts.end()) - counts.begin();
      row[static_cast<std::size_t>(b * categories + mode)] = 1;
    }
    hm.row_labels.push_back(label);
    hm.rows.push_back(std::move(row));
    hm.group_sizes.push_back(it->second.size());
  }
  return hm;
}

StrategyHeatmap build_heatmap(const RestModel& model, const GraphStore& graph,
                              const std::vector<InteractionRecord>& interactions, const Grouping& grouping) {
  if (grouping.kind == Grouping::Kind::kLabels && grouping.labels.size() != interactions.size())
    throw ValidationError("label grouping needs one label per interaction");

  std::vector<std::string> group_of;
  std::vector<std::string> order = grouping.order;
  group_of.reserve(interactions.size());
  if (grouping.kind == Grouping::Kind::kLabels) {
    group_of = grouping.labels;
  } else {
    const std::int64_t width = grouping.kind == Grouping::Kind::kDate ? 86400 : grouping.window;
    std::vector<std::int64_t> bucket;
    for (const auto& r : interactions) {
      if (!r.timestamp) throw ValidationError("time grouping needs timestamps on every interaction");
      bucket.push_back(floor_div(*r.timestamp, width));
    }
    auto label = [&](std::int64_t b) {
      if (grouping.kind == Grouping::Kind::kDate) return utc_date(b);
      return "[" + std::to_string(b * width) + "," + std::to_string((b + 1) * width) + ")";
    };
    for (auto b : bucket) group_of.push_back(label(b));
    order.clear();
    if (!bucket.empty()) {
      const auto [lo, hi] = std::minmax_element(bucket.begin(), bucket.end());
      if (*hi - *lo > kMaxWindows) throw ValidationError("grouping spans too many windows; use a wider window");
      for (std::int64_t b = *lo; b <= *hi; ++b) order.push_back(label(b));
    }
  }

  std::vector<std::vector<int>> codes;
  codes.reserve(interactions.size());
  for (const auto& r : interactions) codes.push_back(model.strategy_code_for_eval(graph, r.user, r.item));
  return heatmap_from_codes(codes, group_of, order, model.config().blocks, model.config().categories);
}

}  // namespace rest
