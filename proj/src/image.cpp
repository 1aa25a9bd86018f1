#include "sts/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "sts/common.hpp"

namespace sts {

namespace {

void put_be32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

void append_chunk(std::string& out, const char type[4], const std::string& payload) {
  put_be32(out, static_cast<std::uint32_t>(payload.size()));
  std::string body(type, 4);
  body += payload;
  out += body;
  const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                         static_cast<uInt>(body.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

// simple dark-blue / magenta / yellow ramp
void colormap(float v01, unsigned char* rgb) {
  const float v = std::clamp(v01, 0.0f, 1.0f);
  rgb[0] = static_cast<unsigned char>(255.0f * std::clamp(1.6f * v - 0.3f, 0.0f, 1.0f));
  rgb[1] = static_cast<unsigned char>(255.0f * std::clamp(1.4f * v * v, 0.0f, 1.0f));
  rgb[2] = static_cast<unsigned char>(
      255.0f * std::clamp(0.4f + 1.2f * v - 1.4f * v * v, 0.0f, 1.0f));
}

}  // namespace

void write_mel_png(const std::string& path,
                   const std::vector<const dsp::LogMelSpectrogram*>& mels) {
  if (mels.empty()) throw std::invalid_argument("write_mel_png: nothing to plot");
  int width = 0;
  int height = 0;
  float lo = 1e30f, hi = -1e30f;
  for (const auto* mel : mels) {
    if (mel->frames() == 0) throw ValidationError("write_mel_png: empty spectrogram");
    width = std::max(width, mel->frames());
    height += mel->n_mels() + 2;  // separator rows
    lo = std::min(lo, mel->values.minCoeff());
    hi = std::max(hi, mel->values.maxCoeff());
  }
  height -= 2;
  const float span = hi > lo ? hi - lo : 1.0f;

  std::string raster;
  raster.reserve(static_cast<std::size_t>(height) * (1 + 3 * width));
  for (std::size_t p = 0; p < mels.size(); ++p) {
    const auto& m = *mels[p];
    for (int row = 0; row < m.n_mels(); ++row) {
      raster.push_back('\0');  // filter: none
      const int bin = m.n_mels() - 1 - row;  // low frequencies at the bottom
      for (int t = 0; t < width; ++t) {
        unsigned char rgb[3] = {0, 0, 0};
        if (t < m.frames()) colormap((m.values(bin, t) - lo) / span, rgb);
        raster.append(reinterpret_cast<char*>(rgb), 3);
      }
    }
    if (p + 1 < mels.size()) {
      for (int s = 0; s < 2; ++s) {
        raster.push_back('\0');
        raster.append(static_cast<std::size_t>(3 * width), '\xff');
      }
    }
  }

  uLongf zlen = compressBound(static_cast<uLong>(raster.size()));
  std::string compressed(zlen, '\0');
  if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &zlen,
                reinterpret_cast<const Bytef*>(raster.data()),
                static_cast<uLong>(raster.size()), 6) != Z_OK) {
    throw ValidationError("write_mel_png: compression failed");
  }
  compressed.resize(zlen);

  std::string png("\x89PNG\r\n\x1a\n", 8);
  std::string ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(width));
  put_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  append_chunk(png, "IHDR", ihdr);
  append_chunk(png, "IDAT", compressed);
  append_chunk(png, "IEND", "");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write PNG: " + path);
  out.write(png.data(), static_cast<std::streamsize>(png.size()));
}

}  // namespace sts
