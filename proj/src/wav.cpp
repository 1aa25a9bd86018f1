#include "sts/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "sts/common.hpp"

namespace sts {

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open WAV file: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ParseError("not a RIFF/WAVE file: " + path, 1);
  }

  int format = 0;
  int channels = 0;
  int sample_rate = 0;
  int bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
    std::uint32_t size = read_u32(bytes.data() + pos + 4);
    pos += 8;
    if (pos + size > bytes.size()) size = static_cast<std::uint32_t>(bytes.size() - pos);
    if (std::memcmp(id, "fmt ", 4) == 0 && size >= 16) {
      format = read_u16(bytes.data() + pos);
      channels = read_u16(bytes.data() + pos + 2);
      sample_rate = static_cast<int>(read_u32(bytes.data() + pos + 4));
      bits = read_u16(bytes.data() + pos + 14);
    } else if (std::memcmp(id, "data", 4) == 0) {
      data = bytes.data() + pos;
      data_len = size;
    }
    pos += size + (size & 1);  // chunks are word-aligned
  }

  if (data == nullptr || channels <= 0 || sample_rate <= 0) {
    throw ParseError("WAV file missing fmt/data chunk: " + path, 1);
  }

  Waveform wave;
  wave.sample_rate = sample_rate;
  if (format == 1 && bits == 16) {
    const std::size_t n_frames = data_len / (2 * channels);
    wave.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
      double acc = 0.0;
      for (int c = 0; c < channels; ++c) {
        const unsigned char* p = data + (i * channels + c) * 2;
        std::int16_t s = static_cast<std::int16_t>(p[0] | (p[1] << 8));
        acc += s / 32768.0;
      }
      wave.samples[i] = static_cast<float>(acc / channels);
    }
  } else if (format == 3 && bits == 32) {
    const std::size_t n_frames = data_len / (4 * channels);
    wave.samples.resize(n_frames);
    for (std::size_t i = 0; i < n_frames; ++i) {
      double acc = 0.0;
      for (int c = 0; c < channels; ++c) {
        float v;
        std::memcpy(&v, data + (i * channels + c) * 4, 4);
        acc += v;
      }
      wave.samples[i] = static_cast<float>(acc / channels);
    }
  } else {
    throw ParseError("unsupported WAV encoding (need 16-bit PCM or 32-bit float): " + path, 1);
  }
  return wave;
}

void write_wav(const std::string& path, const Waveform& wave) {
  if (wave.sample_rate <= 0) throw std::invalid_argument("write_wav: sample_rate must be > 0");
  std::string out;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate * 2));
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (float s : wave.samples) {
    float x = std::clamp(s, -1.0f, 1.0f);
    std::int16_t q = static_cast<std::int16_t>(std::lrint(x * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write WAV file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace sts
