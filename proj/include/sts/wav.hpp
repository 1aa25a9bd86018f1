#ifndef STS_WAV_HPP
#define STS_WAV_HPP

#include <string>
#include <vector>

namespace sts {

/// Mono audio. Samples are finite reals in [-1, 1]; sample_rate is in Hz.
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 0;

  double duration_sec() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Reads a RIFF WAV file (16-bit PCM or 32-bit float). Stereo is downmixed
/// by averaging channels. Throws ParseError on malformed files.
Waveform read_wav(const std::string& path);

/// Writes mono 16-bit PCM. Samples are clipped to [-1, 1].
void write_wav(const std::string& path, const Waveform& wave);

}  // namespace sts

#endif  // STS_WAV_HPP
