#include "trice/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace trice {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

namespace {

constexpr char kMagic[6] = {'T', 'R', 'I', 'C', 'E', '\x01'};

void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw TruncatedError("checkpoint truncated");
  return v;
}

std::string get_bytes(std::istream& is, std::uint32_t n) {
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw TruncatedError("checkpoint truncated");
  return s;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoError("malformed checkpoint config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint " + path);
  f.write(kMagic, sizeof(kMagic));

  auto kv = ckpt.config.to_kv();
  kv["stage"] = stage_name(ckpt.stage);
  kv["step"] = std::to_string(ckpt.step);
  std::string cfg;
  for (const auto& [k, v] : kv) cfg += k + "=" + v + "\n";
  put_u32(f, static_cast<std::uint32_t>(cfg.size()));
  f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

  put_u32(f, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& [name, tensor] : ckpt.params) {
    put_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(f, static_cast<std::uint32_t>(tensor.rank()));
    for (int i = 0; i < tensor.rank(); ++i)
      put_u32(f, static_cast<std::uint32_t>(tensor.dim(i)));
    const real* p = tensor.data();
    for (long i = 0; i < tensor.numel(); ++i) {
      const float v = static_cast<float>(p[i]);
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  }

  put_u32(f, static_cast<std::uint32_t>(ckpt.rng_state.size()));
  f.write(ckpt.rng_state.data(),
          static_cast<std::streamsize>(ckpt.rng_state.size()));
  if (!f) throw IoError("write failure on checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint " + path);
  char magic[sizeof(kMagic)];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw BadMagicError("bad magic in checkpoint " + path);

  Checkpoint ckpt;
  const auto kv = parse_kv(get_bytes(f, get_u32(f)));
  ckpt.config = ModelConfig::from_kv(kv);
  if (auto it = kv.find("stage"); it != kv.end())
    ckpt.stage = parse_stage(it->second);
  if (auto it = kv.find("step"); it != kv.end()) ckpt.step = std::stol(it->second);

  const std::uint32_t count = get_u32(f);
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = get_bytes(f, get_u32(f));
    const std::uint32_t rank = get_u32(f);
    std::vector<int> shape;
    long numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape.push_back(static_cast<int>(get_u32(f)));
      numel *= shape.back();
    }
    Tensor tensor(shape);
    real* p = tensor.mut();
    for (long i = 0; i < numel; ++i) {
      float v = 0;
      f.read(reinterpret_cast<char*>(&v), 4);
      if (!f) throw TruncatedError("checkpoint truncated");
      p[i] = static_cast<real>(v);
    }
    ckpt.params.emplace(name, std::move(tensor));
  }
  ckpt.rng_state = get_bytes(f, get_u32(f));

  // The stored tensors must be exactly the config-derived name set.
  std::set<std::string> have;
  for (const auto& [name, tensor] : ckpt.params) have.insert(name);
  for (const auto& [name, shape] : parameter_specs(ckpt.config)) {
    auto it = ckpt.params.find(name);
    if (it == ckpt.params.end())
      throw NameMismatchError("checkpoint name-set mismatch: missing " + name);
    if (it->second.shape() != shape)
      throw NameMismatchError("checkpoint name-set mismatch: bad shape for " +
                              name);
    have.erase(name);
  }
  if (!have.empty())
    throw NameMismatchError("checkpoint name-set mismatch: unexpected " +
                            *have.begin());
  return ckpt;
}

}  // namespace trice
