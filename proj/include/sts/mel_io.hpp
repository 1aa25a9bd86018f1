#ifndef STS_MEL_IO_HPP
#define STS_MEL_IO_HPP

#include <string>

#include "sts/dsp.hpp"

namespace sts {

// MEL1 container: magic "MEL1", then little-endian u32 n_mels, u32 frames,
// u32 sample_rate, u32 hop_samples, then n_mels*frames f32 values stored
// frame-major (all of frame 0, then frame 1, ...). Round trips are bit-exact.

void write_mel1(const std::string& path, const dsp::LogMelSpectrogram& mel);
dsp::LogMelSpectrogram read_mel1(const std::string& path);

}  // namespace sts

#endif  // STS_MEL_IO_HPP
