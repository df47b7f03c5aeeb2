#include "rest/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "rest/errors.hpp"

namespace rest {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

constexpr char kMagic[8] = {'R', 'E', 'S', 'T', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw ValidationError("cannot write checkpoint " + path.string());
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path.string()) {
    if (!in_) throw ValidationError("cannot open checkpoint " + path_);
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in_) throw ValidationError("truncated checkpoint " + path_);
  }
  std::uint32_t u32() {
    std::uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = u64();
    if (n > (1ULL << 32)) throw ValidationError("corrupt checkpoint " + path_);
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Writer w(path);
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointFormatVersion);
  w.u32(kConfigSchemaVersion);

  KeyValueConfig meta = ckpt.run_config;
  ckpt.model_config.to_kv(meta, "checkpoint.model.");
  meta.set_int("checkpoint.step", ckpt.step);
  meta.set_double("checkpoint.validation_metric", ckpt.validation_metric);
  w.str(meta.serialize());

  std::uint32_t count = 0;
  ckpt.params.visit([&](const std::string&, const auto&, bool) { ++count; });
  w.u32(count);
  ckpt.params.visit([&](const std::string& name, const auto& t, bool) {
    w.str(name);
    w.u64(static_cast<std::uint64_t>(t.rows()));
    w.u64(static_cast<std::uint64_t>(t.cols()));
    w.bytes(t.data(), static_cast<std::size_t>(t.size()) * sizeof(double));
  });

  for (const IdMap* map : {&ckpt.users, &ckpt.items}) {
    w.u64(map->size());
    for (const auto& name : map->names()) w.str(name);
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ValidationError(path.string() + " is not a checkpoint");
  const auto format = r.u32();
  const auto schema = r.u32();
  if (format != kCheckpointFormatVersion)
    throw ValidationError("checkpoint format version " + std::to_string(format) + " is not supported (expected " +
                          std::to_string(kCheckpointFormatVersion) + ")");
  if (schema != kConfigSchemaVersion)
    throw ValidationError("checkpoint config schema version " + std::to_string(schema) + " does not match " +
                          std::to_string(kConfigSchemaVersion));

  Checkpoint ckpt;
  const auto meta = KeyValueConfig::parse(r.str(), path.string());
  ckpt.model_config = ModelConfig::from_kv(meta, "checkpoint.model.");
  ckpt.step = meta.get_int("checkpoint.step", 0);
  ckpt.validation_metric = meta.get_double("checkpoint.validation_metric", 0.0);
  for (const auto& [k, v] : meta.values())
    if (k.rfind("checkpoint.", 0) != 0) ckpt.run_config.set(k, v);

  ckpt.model_config.validate();
  ckpt.params = ModelParameters::zeros(ckpt.model_config);
  const auto count = r.u32();
  std::uint32_t expected = 0;
  ckpt.params.visit([&](const std::string&, const auto&, bool) { ++expected; });
  if (count != expected) throw ValidationError("checkpoint tensor count does not match its model config");
  ckpt.params.visit([&](const std::string& name, auto& t, bool) {
    const auto stored = r.str();
    const auto rows = r.u64();
    const auto cols = r.u64();
    if (stored != name || rows != static_cast<std::uint64_t>(t.rows()) || cols != static_cast<std::uint64_t>(t.cols()))
      throw ValidationError("checkpoint tensor '" + stored + "' does not match the expected '" + name + "' layout");
    r.bytes(t.data(), static_cast<std::size_t>(t.size()) * sizeof(double));
  });

  for (IdMap* map : {&ckpt.users, &ckpt.items}) {
    const auto n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) map->intern(r.str());
  }
  return ckpt;
}

}  // namespace rest
