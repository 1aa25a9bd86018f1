#include "sts/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace sts {

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& f, const std::string& path) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4)) {
    throw ParseError("truncated checkpoint: " + path, 1);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

const MatF& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) {
    throw ValidationError("checkpoint is missing tensor '" + name + "'");
  }
  return it->second;
}

void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<NamedTensorView>& tensors) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write checkpoint: " + path);
  f.write("STSC", 4);
  put_u32(f, kCheckpointVersion);
  const std::string meta_str = meta.dump();
  put_u32(f, static_cast<std::uint32_t>(meta_str.size()));
  f.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  put_u32(f, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    put_u32(f, static_cast<std::uint32_t>(t.name.size()));
    f.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(f, static_cast<std::uint32_t>(t.value->rows()));
    put_u32(f, static_cast<std::uint32_t>(t.value->cols()));
    f.write(reinterpret_cast<const char*>(t.value->data()),
            static_cast<std::streamsize>(sizeof(float) * t.value->size()));
  }
  if (!f) throw ValidationError("write failed for checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open checkpoint: " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "STSC", 4) != 0) {
    throw ParseError("bad checkpoint magic in " + path, 1);
  }
  const std::uint32_t version = get_u32(f, path);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version) +
                          " in " + path);
  }
  const std::uint32_t meta_len = get_u32(f, path);
  std::string meta_str(meta_len, '\0');
  if (!f.read(meta_str.data(), meta_len)) throw ParseError("truncated checkpoint: " + path, 1);

  Checkpoint ckpt;
  try {
    ckpt.meta = nlohmann::json::parse(meta_str);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad checkpoint metadata in " + path + ": " + e.what(), 1);
  }
  const std::uint32_t count = get_u32(f, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = get_u32(f, path);
    std::string name(name_len, '\0');
    if (!f.read(name.data(), name_len)) throw ParseError("truncated checkpoint: " + path, 1);
    const std::uint32_t rows = get_u32(f, path);
    const std::uint32_t cols = get_u32(f, path);
    MatF m(rows, cols);
    if (!f.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(float) * m.size()))) {
      throw ParseError("truncated tensor '" + name + "' in " + path, 1);
    }
    ckpt.tensors.emplace(std::move(name), std::move(m));
  }
  return ckpt;
}

}  // namespace sts
