#include "sts/mel_io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "sts/common.hpp"

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
    throw ParseError("truncated MEL1 file: " + path, 1);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_mel1(const std::string& path, const dsp::LogMelSpectrogram& mel) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write MEL1 file: " + path);
  f.write("MEL1", 4);
  put_u32(f, static_cast<std::uint32_t>(mel.n_mels()));
  put_u32(f, static_cast<std::uint32_t>(mel.frames()));
  put_u32(f, static_cast<std::uint32_t>(mel.sample_rate));
  put_u32(f, static_cast<std::uint32_t>(mel.hop));
  // frame-major: columns of the (n_mels x frames) matrix in order
  std::vector<char> buf(static_cast<std::size_t>(mel.n_mels()) * 4);
  for (int t = 0; t < mel.frames(); ++t) {
    for (int m = 0; m < mel.n_mels(); ++m) {
      float v = mel.values(m, t);
      std::memcpy(buf.data() + static_cast<std::size_t>(m) * 4, &v, 4);
    }
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!f) throw ValidationError("write failed for MEL1 file: " + path);
}

dsp::LogMelSpectrogram read_mel1(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open MEL1 file: " + path);
  char magic[4];
  if (!f.read(magic, 4) || std::memcmp(magic, "MEL1", 4) != 0) {
    throw ParseError("bad MEL1 magic in " + path, 1);
  }
  const std::uint32_t n_mels = get_u32(f, path);
  const std::uint32_t frames = get_u32(f, path);
  const std::uint32_t sample_rate = get_u32(f, path);
  const std::uint32_t hop = get_u32(f, path);
  if (n_mels == 0 || n_mels > 1u << 20 || frames > 1u << 26) {
    throw ParseError("implausible MEL1 dimensions in " + path, 1);
  }

  dsp::LogMelSpectrogram mel;
  mel.sample_rate = static_cast<int>(sample_rate);
  mel.hop = static_cast<int>(hop);
  mel.values.resize(n_mels, frames);
  std::vector<char> buf(static_cast<std::size_t>(n_mels) * 4);
  for (std::uint32_t t = 0; t < frames; ++t) {
    if (!f.read(buf.data(), static_cast<std::streamsize>(buf.size()))) {
      throw ParseError("truncated MEL1 data in " + path, 1);
    }
    for (std::uint32_t m = 0; m < n_mels; ++m) {
      float v;
      std::memcpy(&v, buf.data() + static_cast<std::size_t>(m) * 4, 4);
      mel.values(m, t) = v;
    }
  }
  return mel;
}

}  // namespace sts
