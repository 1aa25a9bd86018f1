#ifndef STS_IMAGE_HPP
#define STS_IMAGE_HPP

#include <string>
#include <vector>

#include "sts/dsp.hpp"

namespace sts {

/// Renders one or more spectrograms (stacked vertically, low bins at the
/// bottom) as an 8-bit PNG with a shared value scale.
void write_mel_png(const std::string& path,
                   const std::vector<const dsp::LogMelSpectrogram*>& mels);

}  // namespace sts

#endif  // STS_IMAGE_HPP
