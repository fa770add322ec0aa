#include "dyhsl/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "dyhsl/config_json.hpp"
#include "dyhsl/error.hpp"

namespace dyhsl {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'D', 'Y', 'H', 'S', 'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <class T>
  T get(const char* what) {
    T v{};
    bytes(reinterpret_cast<char*>(&v), sizeof v, what);
    return v;
  }

  void bytes(char* dst, std::size_t n, const char* what) {
    if (!in_.read(dst, static_cast<std::streamsize>(n))) {
      throw FormatError(path_ + ": truncated checkpoint while reading " + what);
    }
  }

  std::string string(std::uint64_t n, const char* what) {
    if (n > (1u << 30)) throw FormatError(path_ + ": implausible " + std::string(what) + " length");
    std::string s(n, '\0');
    bytes(s.data(), n, what);
    return s;
  }

  const std::string& path() const { return path_; }

 private:
  std::istream& in_;
  std::string path_;
};

}  // namespace

void to_json(nlohmann::json& j, const NormStats& s) { j = {{"mean", s.mean}, {"std", s.std}}; }

void from_json(const nlohmann::json& j, NormStats& s) {
  j.at("mean").get_to(s.mean);
  j.at("std").get_to(s.std);
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  check_parameter_layout(ckpt.config, ckpt.params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const std::string header = nlohmann::json{{"config", ckpt.config}, {"norm", ckpt.stats}, {"extra", ckpt.extra}}.dump();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  std::uint64_t count = 0;
  for_each_param(ckpt.params, [&](const std::string&, const Tensor&) { ++count; });
  put<std::uint64_t>(out, count);
  for_each_param(ckpt.params, [&](const std::string& name, const Tensor& t) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  });
  if (!out) throw Error("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError(r.path() + ": not a checkpoint file");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    throw FormatError(r.path() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(r.string(r.get<std::uint64_t>("header length"), "header"));
    header.at("config").get_to(ckpt.config);
    header.at("norm").get_to(ckpt.stats);
    ckpt.extra = header.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(r.path() + ": bad checkpoint header: " + e.what());
  }
  ckpt.config.validate();
  ckpt.params = zero_parameters(ckpt.config);

  std::vector<std::pair<std::string, Tensor*>> slots;
  for_each_param(ckpt.params, [&](const std::string& name, Tensor& t) { slots.emplace_back(name, &t); });
  const auto count = r.get<std::uint64_t>("tensor count");
  if (count != slots.size()) {
    throw DimensionError(r.path() + ": " + std::to_string(count) + " tensors stored, configuration needs " +
                         std::to_string(slots.size()));
  }
  for (auto& [name, slot] : slots) {
    const std::string stored = r.string(r.get<std::uint32_t>("tensor name length"), "tensor name");
    if (stored != name) throw DimensionError(r.path() + ": expected tensor " + name + ", found " + stored);
    const auto rank = r.get<std::uint32_t>("rank");
    if (rank > 8) throw FormatError(r.path() + ": implausible rank for " + name);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.get<std::uint64_t>("dimension"));
    if (shape != slot->shape()) {
      throw DimensionError(r.path() + ": tensor " + name + " has shape " + shape_string(shape) + ", expected " +
                           shape_string(slot->shape()));
    }
    r.bytes(reinterpret_cast<char*>(slot->data()), slot->size() * sizeof(double), name.c_str());
    slot->require_finite(name);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(r.path() + ": trailing bytes after the last tensor");
  return ckpt;
}

}  // namespace dyhsl
