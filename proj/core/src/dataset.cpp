#include "rest/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rest/errors.hpp"
#include "rest/kv_config.hpp"

namespace rest {
namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  return out;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_no;
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    fn(line_no, line);
  }
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

std::string to_string(FeedbackKind kind) { return kind == FeedbackKind::kExplicit ? "explicit" : "implicit"; }

FeedbackKind feedback_kind_from_string(const std::string& text) {
  if (text == "explicit") return FeedbackKind::kExplicit;
  if (text == "implicit") return FeedbackKind::kImplicit;
  throw ValidationError("unknown feedback kind '" + text + "'");
}

TsvFormat tsv_format_from_string(const std::string& text) {
  if (text == "tsv-explicit") return TsvFormat::kExplicit;
  if (text == "tsv-implicit") return TsvFormat::kImplicit;
  throw ValidationError("unknown data format '" + text + "' (expected tsv-explicit or tsv-implicit)");
}

std::int32_t IdMap::intern(const std::string& original) {
  auto [it, inserted] = index_.emplace(original, static_cast<std::int32_t>(names_.size()));
  if (inserted) names_.push_back(original);
  return it->second;
}

std::optional<std::int32_t> IdMap::find(const std::string& original) const {
  auto it = index_.find(original);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void IdMap::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (std::size_t i = 0; i < names_.size(); ++i) out << i << '\t' << names_[i] << '\n';
}

IdMap IdMap::load(const std::filesystem::path& path) {
  IdMap map;
  const auto text = read_file(path);
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto cols = split_tabs(line);
    std::int32_t dense = 0;
    if (cols.size() != 2 || !parse_number(cols[0], dense))
      throw ParseError(path.string(), line_no, "expected 'dense<TAB>original'");
    if (dense != static_cast<std::int32_t>(map.size()))
      throw ParseError(path.string(), line_no, "dense ids must be consecutive from 0");
    map.intern(std::string(cols[1]));
  });
  return map;
}

void Dataset::validate() const {
  if (num_users < 0 || num_items < 0) throw ValidationError("negative id-space size");
  if (users.size() != 0 && users.size() != static_cast<std::size_t>(num_users))
    throw ValidationError("user id map size does not match num_users");
  if (items.size() != 0 && items.size() != static_cast<std::size_t>(num_items))
    throw ValidationError("item id map size does not match num_items");
  std::set<std::pair<UserId, ItemId>> seen;
  for (const auto& r : interactions) {
    if (r.user < 0 || r.user >= num_users) throw ValidationError("user id out of range");
    if (r.item < 0 || r.item >= num_items) throw ValidationError("item id out of range");
    if (r.rating < 1 || r.rating > rating_levels)
      throw ValidationError("rating " + std::to_string(r.rating) + " outside [1, " +
                            std::to_string(rating_levels) + "]");
    if (!seen.emplace(r.user, r.item).second)
      throw ValidationError("duplicate (user, item) pair in interactions");
  }
  std::set<std::pair<UserId, UserId>> edges(social_edges.begin(), social_edges.end());
  for (const auto& [a, b] : social_edges) {
    if (a < 0 || a >= num_users || b < 0 || b >= num_users)
      throw ValidationError("social edge references an unknown user");
    if (a == b) throw ValidationError("social self loop");
    if (!edges.count({b, a})) throw ValidationError("social edges are not stored symmetrically");
  }
}

Dataset Dataset::with_interactions(std::vector<InteractionRecord> records) const {
  Dataset out;
  out.interactions = std::move(records);
  out.social_edges = social_edges;
  out.num_users = num_users;
  out.num_items = num_items;
  out.feedback_kind = feedback_kind;
  out.rating_levels = rating_levels;
  out.users = users;
  out.items = items;
  return out;
}

Dataset parse_dataset(const std::string& interactions_tsv, const std::optional<std::string>& social_tsv,
                      TsvFormat format, int rating_levels, LoadSummary* summary,
                      const std::string& source) {
  LoadSummary local;
  LoadSummary& sum = summary ? *summary : local;
  sum = {};

  Dataset ds;
  ds.feedback_kind = format == TsvFormat::kExplicit ? FeedbackKind::kExplicit : FeedbackKind::kImplicit;
  ds.rating_levels = format == TsvFormat::kExplicit ? rating_levels : 1;
  if (ds.rating_levels < 1) throw ValidationError("rating_levels must be at least 1");

  // (user, item) -> position in ds.interactions
  std::map<std::pair<UserId, ItemId>, std::size_t> position;

  for_each_line(interactions_tsv, [&](std::size_t line_no, std::string_view line) {
    ++sum.lines_read;
    auto cols = split_tabs(line);
    const bool implicit = format == TsvFormat::kImplicit;
    if (cols.size() < (implicit ? 2u : 3u) || cols.size() > 4)
      throw ParseError(source, line_no,
                       implicit ? "expected user<TAB>item[<TAB>rating[<TAB>timestamp]]"
                                : "expected user<TAB>item<TAB>rating[<TAB>timestamp]");
    if (cols[0].empty() || cols[1].empty()) throw ParseError(source, line_no, "empty id");
    InteractionRecord rec;
    if (cols.size() >= 3) {
      if (!parse_number(cols[2], rec.rating)) throw ParseError(source, line_no, "rating is not an integer");
    }
    if (cols.size() == 4) {
      std::int64_t ts = 0;
      if (!parse_number(cols[3], ts)) throw ParseError(source, line_no, "timestamp is not an integer");
      rec.timestamp = ts;
    }
    if (implicit && rec.rating != 1)
      throw ValidationError(source + ":" + std::to_string(line_no) + ": implicit feedback rating must be 1");
    if (!implicit && (rec.rating < 1 || rec.rating > rating_levels))
      throw ValidationError(source + ":" + std::to_string(line_no) + ": rating " + std::to_string(rec.rating) +
                            " outside [1, " + std::to_string(rating_levels) + "]");
    rec.user = ds.users.intern(std::string(cols[0]));
    rec.item = ds.items.intern(std::string(cols[1]));
    rec.exposed = true;

    auto [it, inserted] = position.emplace(std::make_pair(rec.user, rec.item), ds.interactions.size());
    if (inserted) {
      ds.interactions.push_back(rec);
      return;
    }
    ++sum.duplicates_replaced;
    auto& existing = ds.interactions[it->second];
    // Latest timestamp wins; without timestamps the last occurrence wins.
    const bool keep_existing = existing.timestamp && rec.timestamp && *existing.timestamp > *rec.timestamp;
    if (!keep_existing) existing = rec;
  });

  if (ds.interactions.empty()) throw ValidationError(source + ": no interactions");
  ds.num_users = static_cast<std::int32_t>(ds.users.size());
  ds.num_items = static_cast<std::int32_t>(ds.items.size());

  if (social_tsv) {
    std::set<std::pair<UserId, UserId>> edges;
    for_each_line(*social_tsv, [&](std::size_t line_no, std::string_view line) {
      auto cols = split_tabs(line);
      if (cols.size() < 2) throw ParseError("<social>", line_no, "expected user<TAB>user");
      auto a = ds.users.find(std::string(cols[0]));
      auto b = ds.users.find(std::string(cols[1]));
      if (!a || !b || *a == *b) {
        ++sum.social_edges_dropped;
        return;
      }
      edges.emplace(*a, *b);
      edges.emplace(*b, *a);
    });
    ds.social_edges.assign(edges.begin(), edges.end());
  }
  return ds;
}

Dataset load_dataset(const LoadOptions& options, LoadSummary* summary) {
  if (!std::filesystem::exists(options.interactions))
    throw ValidationError("interaction file not found: " + options.interactions.string());
  std::optional<std::string> social;
  if (options.social) {
    if (!std::filesystem::exists(*options.social))
      throw ValidationError("social file not found: " + options.social->string());
    social = read_file(*options.social);
  }
  return parse_dataset(read_file(options.interactions), social, options.format, options.rating_levels, summary,
                       options.interactions.string());
}

void save_interactions_tsv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& r : ds.interactions) {
    out << r.user << '\t' << r.item << '\t' << r.rating;
    if (r.timestamp) out << '\t' << *r.timestamp;
    out << '\n';
  }
}

void save_social_tsv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& [a, b] : ds.social_edges)
    if (a < b) out << a << '\t' << b << '\n';
}

void save_prepared(const Dataset& ds, const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  KeyValueConfig meta;
  meta.set_int("num_users", ds.num_users);
  meta.set_int("num_items", ds.num_items);
  meta.set("feedback_kind", to_string(ds.feedback_kind));
  meta.set_int("rating_levels", ds.rating_levels);
  meta.save(dir / "meta.cfg");
  ds.users.save(dir / "users.tsv");
  ds.items.save(dir / "items.tsv");
  save_social_tsv(ds, dir / "social.tsv");
  save_interactions_tsv(ds, dir / (name + ".tsv"));
}

Dataset load_prepared(const std::filesystem::path& dir, const std::string& name) {
  const auto meta = KeyValueConfig::load(dir / "meta.cfg");
  Dataset ds;
  ds.num_users = static_cast<std::int32_t>(meta.get_int("num_users", 0));
  ds.num_items = static_cast<std::int32_t>(meta.get_int("num_items", 0));
  ds.feedback_kind = feedback_kind_from_string(meta.get_string("feedback_kind", "explicit"));
  ds.rating_levels = static_cast<int>(meta.get_int("rating_levels", 5));
  ds.users = IdMap::load(dir / "users.tsv");
  ds.items = IdMap::load(dir / "items.tsv");

  const auto path = dir / (name + ".tsv");
  const auto text = read_file(path);
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    auto cols = split_tabs(line);
    InteractionRecord r;
    if (cols.size() < 3 || cols.size() > 4 || !parse_number(cols[0], r.user) || !parse_number(cols[1], r.item) ||
        !parse_number(cols[2], r.rating))
      throw ParseError(path.string(), line_no, "expected dense user<TAB>item<TAB>rating[<TAB>timestamp]");
    if (cols.size() == 4) {
      std::int64_t ts = 0;
      if (!parse_number(cols[3], ts)) throw ParseError(path.string(), line_no, "bad timestamp");
      r.timestamp = ts;
    }
    ds.interactions.push_back(r);
  });

  const auto social_text = read_file(dir / "social.tsv");
  for_each_line(social_text, [&](std::size_t line_no, std::string_view line) {
    auto cols = split_tabs(line);
    UserId a = 0, b = 0;
    if (cols.size() != 2 || !parse_number(cols[0], a) || !parse_number(cols[1], b))
      throw ParseError((dir / "social.tsv").string(), line_no, "expected dense user<TAB>user");
    ds.social_edges.emplace_back(a, b);
    ds.social_edges.emplace_back(b, a);
  });
  std::sort(ds.social_edges.begin(), ds.social_edges.end());
  ds.validate();
  return ds;
}

}  // namespace rest
