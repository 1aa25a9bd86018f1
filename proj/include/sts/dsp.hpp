#ifndef STS_DSP_HPP
#define STS_DSP_HPP

#include <optional>
#include <vector>

#include "sts/common.hpp"
#include "sts/wav.hpp"

namespace sts::dsp {

/// Shared front-end settings. A 12.5 ms hop at 22050 Hz is 275.625 samples;
/// we fix the integer hop to 276.
struct DspConfig {
  int sample_rate = 22050;
  int fft_size = 1024;
  int hop = 276;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = -1.0;  // <0 means sample_rate / 2
  float floor_eps = 1e-5f;

  double effective_fmax() const { return fmax < 0.0 ? sample_rate / 2.0 : fmax; }
};

/// |STFT| magnitudes, bins x frames, bins = fft_size/2 + 1.
struct LinearSpectrogram {
  MatF magnitudes;
  int fft_size = 0;
  int hop = 0;
  int sample_rate = 0;

  int bins() const { return static_cast<int>(magnitudes.rows()); }
  int frames() const { return static_cast<int>(magnitudes.cols()); }
};

/// Natural-log mel magnitudes, n_mels x frames, floored at log(floor_eps).
struct LogMelSpectrogram {
  MatF values;
  int hop = 0;
  int sample_rate = 0;
  float floor_eps = 1e-5f;

  int n_mels() const { return static_cast<int>(values.rows()); }
  int frames() const { return static_cast<int>(values.cols()); }
  float floor_value() const { return std::log(floor_eps); }
};

/// Slaney-style area-normalized triangular filterbank over [fmin, fmax].
struct MelFilterbank {
  MatF weights;                         // n_mels x bins
  std::vector<double> center_freqs_hz;  // triangle peaks, one per mel row

  static MelFilterbank make(int n_mels, int fft_size, int sample_rate, double fmin, double fmax);
};

double hz_to_mel_slaney(double hz);
double mel_to_hz_slaney(double mel);

/// Band-limited resampling (Hann-windowed sinc). Empty input gives empty
/// output; a matching rate returns the samples unchanged.
Waveform resample_audio(const Waveform& wave, int dst_rate);

/// Magnitude STFT with a periodic Hann window and center-reflect padding.
/// Frame count is ceil(len / hop); inputs shorter than one hop produce a
/// single frame.
LinearSpectrogram stft_magnitude(const Waveform& wave, int fft_size, int hop);

/// Applies a mel filterbank (built with the module defaults fmin/fmax) to a
/// magnitude spectrogram. Output is n_mels x frames.
MatF mel_project(const LinearSpectrogram& spec, int n_mels, double fmin, double fmax);
MatF mel_project(const LinearSpectrogram& spec, const MelFilterbank& bank);

/// Element-wise ln(max(x, floor_eps)).
LogMelSpectrogram log_compress(const MatF& mel, float floor_eps, int hop, int sample_rate);

/// Linear interpolation along time to exactly target_frames frames, with the
/// first and last input frames preserved. A single-frame input is repeated.
LogMelSpectrogram time_stretch(const LogMelSpectrogram& x, int target_frames);

struct RandomResampleParams {
  int seg_min = 16;
  int seg_max = 32;
  double rate_min = 0.5;
  double rate_max = 2.0;
};

/// Splits the input along time into segments of random length in
/// [seg_min, seg_max] (the final segment may be shorter), stretches each by an
/// independent uniform factor in [rate_min, rate_max], and concatenates the
/// results. Reseeding the generator reproduces the output exactly.
LogMelSpectrogram random_resample(const LogMelSpectrogram& x, Rng& rng,
                                  const RandomResampleParams& params = {});

/// Maps log-mel values back to a nonnegative linear-frequency magnitude
/// spectrogram: exp, row-space pseudo-inverse solve, then multiplicative
/// nonnegative least-squares refinement.
LinearSpectrogram mel_invert(const LogMelSpectrogram& x, const MelFilterbank& bank, int fft_size);

/// Iterative phase reconstruction. Phase starts at zero (or uniform random
/// when phase_seed is set); each iteration replaces the magnitude of the
/// current STFT estimate with `spec`. iterations == 0 performs a single
/// inverse STFT with the initial phase. Output length is (frames - 1) * hop.
Waveform griffin_lim(const LinearSpectrogram& spec, int iterations,
                     std::optional<std::uint64_t> phase_seed = std::nullopt);

/// Convenience pipeline: resample to config rate, STFT, mel, log.
LogMelSpectrogram logmel_of_wave(const Waveform& wave, const DspConfig& cfg);

}  // namespace sts::dsp

#endif  // STS_DSP_HPP
