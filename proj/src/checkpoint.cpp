#include "shiftnet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "shiftnet/error.hpp"

namespace shiftnet {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const std::string& what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw Error(ErrorCode::CkptFormat, what, "truncated checkpoint");
  }
  return v;
}

std::string shape_string(const std::vector<int>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

}  // namespace

void write_checkpoint(const NetParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, path.string(), "cannot open for writing");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors().size()));
  put<std::uint64_t>(out, params.rng_seed);
  for (const auto& t : params.tensors()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (double v : t.values) put<float>(out, static_cast<float>(v));
  }
  if (!out) throw Error(ErrorCode::Io, path.string(), "write failed");
}

NetParams read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, path.string(), "cannot open checkpoint");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::CkptFormat, "magic", "not a checkpoint file");
  }
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw Error(ErrorCode::CkptFormat, "version", "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in, "count");
  NetParams params = NetParams::zeros();
  params.rng_seed = get<std::uint64_t>(in, "rng_seed");
  auto& tensors = params.mutable_tensors();
  if (count != tensors.size()) {
    throw Error(ErrorCode::CkptShape, "count",
                "checkpoint has " + std::to_string(count) + " tensors, architecture expects " +
                    std::to_string(tensors.size()));
  }
  for (auto& t : tensors) {
    const auto len = get<std::uint32_t>(in, "name");
    if (len > 4096) throw Error(ErrorCode::CkptFormat, "name", "implausible name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw Error(ErrorCode::CkptFormat, "name", "truncated checkpoint");
    const auto ndim = get<std::uint32_t>(in, name);
    if (ndim > 8) throw Error(ErrorCode::CkptFormat, name, "implausible rank");
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(get<std::uint32_t>(in, name));
    if (name != t.name || shape != t.shape) {
      throw Error(ErrorCode::CkptShape, name,
                  "checkpoint tensor " + name + shape_string(shape) + " does not match " + t.name +
                      shape_string(t.shape));
    }
    for (double& v : t.values) v = get<float>(in, name);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::CkptFormat, "payload", "trailing bytes after last tensor");
  }
  return params;
}

}  // namespace shiftnet
