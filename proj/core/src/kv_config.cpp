#include "rest/kv_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "rest/errors.hpp"

namespace rest {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': expected a number, got '" + text + "'");
  }
}

std::int64_t parse_int(const std::string& key, const std::string& text) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw ValidationError("config key '" + key + "': expected an integer, got '" + text + "'");
  return v;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  (void)ec;
  return std::string(buf, ptr);
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, const std::string& source) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    cfg.values_[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

std::string KeyValueConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    out += k;
    out += " = ";
    out += v;
    out += '\n';
  }
  return out;
}

void KeyValueConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << serialize();
}

void KeyValueConfig::set_double(const std::string& key, double value) { set(key, format_double(value)); }

void KeyValueConfig::set_doubles(const std::string& key, const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += format_double(values[i]);
  }
  set(key, s);
}

void KeyValueConfig::set_ints(const std::string& key, const std::vector<std::int64_t>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(values[i]);
  }
  set(key, s);
}

void KeyValueConfig::apply_override(std::string_view assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string_view::npos || trim(assignment.substr(0, eq)).empty())
    throw ValidationError("override '" + std::string(assignment) + "' is not of the form key=value");
  set(std::string(trim(assignment.substr(0, eq))), std::string(trim(assignment.substr(eq + 1))));
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? parse_double(key, *v) : fallback;
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
  auto v = get(key);
  return v ? parse_int(key, *v) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ValidationError("config key '" + key + "': expected a boolean, got '" + *v + "'");
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key,
                                                const std::vector<double>& fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& item : split_list(*v)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<std::int64_t> KeyValueConfig::get_ints(const std::string& key,
                                                   const std::vector<std::int64_t>& fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::vector<std::int64_t> out;
  for (const auto& item : split_list(*v)) out.push_back(parse_int(key, item));
  return out;
}

std::vector<std::string> KeyValueConfig::unknown_keys(const std::vector<std::string>& known) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (std::find(known.begin(), known.end(), k) == known.end()) out.push_back(k);
  return out;
}

}  // namespace rest
