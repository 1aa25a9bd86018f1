#include "sts/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

namespace sts::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT. inverse=true applies conjugate transform
// without the 1/N scale (callers scale where needed).
void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
  return w;
}

// Sample index into a center-padded signal with reflection at the edges.
double padded_sample(const std::vector<float>& x, long long idx) {
  const long long n = static_cast<long long>(x.size());
  if (n == 0) return 0.0;
  if (n == 1) return x[0];
  while (idx < 0 || idx >= n) {
    if (idx < 0) idx = -idx;
    if (idx >= n) idx = 2 * (n - 1) - idx;
  }
  return x[static_cast<std::size_t>(idx)];
}

using ComplexSpec = std::vector<std::vector<std::complex<double>>>;  // [frame][bin], bins = fft/2+1

ComplexSpec stft_complex(const std::vector<float>& samples, int fft_size, int hop) {
  const int bins = fft_size / 2 + 1;
  const long long len = static_cast<long long>(samples.size());
  const int frames = std::max<long long>(1, (len + hop - 1) / hop);
  const std::vector<double> win = hann_window(fft_size);

  ComplexSpec out(frames, std::vector<std::complex<double>>(bins));
  std::vector<std::complex<double>> buf(fft_size);
  for (int t = 0; t < frames; ++t) {
    const long long start = static_cast<long long>(t) * hop - fft_size / 2;
    for (int i = 0; i < fft_size; ++i) {
      buf[i] = {padded_sample(samples, start + i) * win[i], 0.0};
    }
    fft(buf, false);
    for (int b = 0; b < bins; ++b) out[t][b] = buf[b];
  }
  return out;
}

// Weighted overlap-add inverse with the same Hann window for synthesis.
// Output trims the center padding: length (frames - 1) * hop.
std::vector<float> istft(const ComplexSpec& spec, int fft_size, int hop) {
  const int frames = static_cast<int>(spec.size());
  const int bins = fft_size / 2 + 1;
  const std::vector<double> win = hann_window(fft_size);
  const long long full = static_cast<long long>(frames - 1) * hop + fft_size;

  std::vector<double> acc(full, 0.0), wsum(full, 0.0);
  std::vector<std::complex<double>> buf(fft_size);
  for (int t = 0; t < frames; ++t) {
    for (int b = 0; b < bins; ++b) buf[b] = spec[t][b];
    for (int b = bins; b < fft_size; ++b) buf[b] = std::conj(spec[t][fft_size - b]);
    fft(buf, true);
    const long long off = static_cast<long long>(t) * hop;
    for (int i = 0; i < fft_size; ++i) {
      const double v = buf[i].real() / fft_size;
      acc[off + i] += win[i] * v;
      wsum[off + i] += win[i] * win[i];
    }
  }

  const long long out_len = std::max<long long>(0, static_cast<long long>(frames - 1) * hop);
  std::vector<float> out(out_len);
  const long long pad = fft_size / 2;
  for (long long i = 0; i < out_len; ++i) {
    const double w = wsum[i + pad];
    out[i] = static_cast<float>(w > 1e-9 ? acc[i + pad] / w : 0.0);
  }
  return out;
}

}  // namespace

double hz_to_mel_slaney(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz_slaney(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

MelFilterbank MelFilterbank::make(int n_mels, int fft_size, int sample_rate, double fmin,
                                  double fmax) {
  if (n_mels <= 0) throw std::invalid_argument("mel filterbank: n_mels must be > 0");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0 + 1e-9)) {
    throw std::invalid_argument("mel filterbank: need 0 <= fmin < fmax <= sample_rate/2");
  }
  const int bins = fft_size / 2 + 1;
  if (n_mels > bins) {
    throw std::invalid_argument("mel filterbank: n_mels exceeds FFT bin count");
  }

  std::vector<double> hz(n_mels + 2);
  const double mel_lo = hz_to_mel_slaney(fmin);
  const double mel_hi = hz_to_mel_slaney(fmax);
  for (int m = 0; m < n_mels + 2; ++m) {
    hz[m] = mel_to_hz_slaney(mel_lo + (mel_hi - mel_lo) * m / (n_mels + 1));
  }

  MelFilterbank bank;
  bank.weights = MatF::Zero(n_mels, bins);
  bank.center_freqs_hz.resize(n_mels);
  for (int m = 0; m < n_mels; ++m) {
    bank.center_freqs_hz[m] = hz[m + 1];
    const double norm = 2.0 / (hz[m + 2] - hz[m]);  // Slaney area normalization
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      const double up = (f - hz[m]) / (hz[m + 1] - hz[m]);
      const double down = (hz[m + 2] - f) / (hz[m + 2] - hz[m + 1]);
      const double w = std::max(0.0, std::min(up, down));
      bank.weights(m, k) = static_cast<float>(w * norm);
    }
  }
  return bank;
}

Waveform resample_audio(const Waveform& wave, int dst_rate) {
  if (dst_rate <= 0) throw std::invalid_argument("resample_audio: dst_rate must be > 0");
  if (wave.samples.empty()) return Waveform{{}, dst_rate};
  if (wave.sample_rate <= 0) throw std::invalid_argument("resample_audio: invalid source rate");
  if (wave.sample_rate == dst_rate) return wave;

  const double ratio = static_cast<double>(dst_rate) / wave.sample_rate;
  const long long out_len =
      std::llround(static_cast<double>(wave.samples.size()) * ratio);
  const double cutoff = std::min(1.0, ratio);  // normalized to source Nyquist
  constexpr int kZeroCrossings = 16;
  const double radius = kZeroCrossings / cutoff;

  Waveform out;
  out.sample_rate = dst_rate;
  out.samples.resize(static_cast<std::size_t>(out_len));
  const long long n = static_cast<long long>(wave.samples.size());
  for (long long i = 0; i < out_len; ++i) {
    const double s = static_cast<double>(i) / ratio;  // position in source samples
    const long long j0 = std::max<long long>(0, static_cast<long long>(std::ceil(s - radius)));
    const long long j1 = std::min<long long>(n - 1, static_cast<long long>(std::floor(s + radius)));
    double acc = 0.0;
    for (long long j = j0; j <= j1; ++j) {
      const double x = s - static_cast<double>(j);
      const double cx = cutoff * x;
      const double sinc = cx == 0.0 ? 1.0 : std::sin(kPi * cx) / (kPi * cx);
      const double w = 0.5 + 0.5 * std::cos(kPi * x / radius);  // Hann lobe over the support
      acc += wave.samples[static_cast<std::size_t>(j)] * cutoff * sinc * w;
    }
    out.samples[static_cast<std::size_t>(i)] = static_cast<float>(acc);
  }
  return out;
}

LinearSpectrogram stft_magnitude(const Waveform& wave, int fft_size, int hop) {
  if (!is_power_of_two(fft_size)) {
    throw std::invalid_argument("stft_magnitude: fft_size must be a power of two");
  }
  if (hop <= 0) throw std::invalid_argument("stft_magnitude: hop must be > 0");

  const ComplexSpec spec = stft_complex(wave.samples, fft_size, hop);
  const int bins = fft_size / 2 + 1;
  const int frames = static_cast<int>(spec.size());

  LinearSpectrogram out;
  out.fft_size = fft_size;
  out.hop = hop;
  out.sample_rate = wave.sample_rate;
  out.magnitudes.resize(bins, frames);
  for (int t = 0; t < frames; ++t) {
    for (int b = 0; b < bins; ++b) {
      out.magnitudes(b, t) = static_cast<float>(std::abs(spec[t][b]));
    }
  }
  return out;
}

MatF mel_project(const LinearSpectrogram& spec, const MelFilterbank& bank) {
  if (bank.weights.cols() != spec.magnitudes.rows()) {
    throw std::invalid_argument("mel_project: filterbank/spectrogram bin mismatch");
  }
  return bank.weights * spec.magnitudes;
}

MatF mel_project(const LinearSpectrogram& spec, int n_mels, double fmin, double fmax) {
  const MelFilterbank bank =
      MelFilterbank::make(n_mels, spec.fft_size, spec.sample_rate, fmin, fmax);
  return mel_project(spec, bank);
}

LogMelSpectrogram log_compress(const MatF& mel, float floor_eps, int hop, int sample_rate) {
  if (floor_eps <= 0.0f) throw std::invalid_argument("log_compress: floor_eps must be > 0");
  LogMelSpectrogram out;
  out.hop = hop;
  out.sample_rate = sample_rate;
  out.floor_eps = floor_eps;
  out.values = mel.unaryExpr([floor_eps](float v) { return std::log(std::max(v, floor_eps)); });
  return out;
}

LogMelSpectrogram time_stretch(const LogMelSpectrogram& x, int target_frames) {
  if (target_frames < 1) throw std::invalid_argument("time_stretch: target_frames must be >= 1");
  const int t_in = x.frames();
  if (t_in < 1) throw ValidationError("time_stretch: empty input");

  LogMelSpectrogram out = x;
  if (t_in == target_frames) return out;
  out.values.resize(x.values.rows(), target_frames);
  if (t_in == 1) {
    for (int t = 0; t < target_frames; ++t) out.values.col(t) = x.values.col(0);
    return out;
  }
  if (target_frames == 1) {
    out.values.col(0) = x.values.col(0);
    return out;
  }
  const double scale = static_cast<double>(t_in - 1) / (target_frames - 1);
  for (int t = 0; t < target_frames; ++t) {
    const double pos = t * scale;
    const int lo = std::min(t_in - 2, static_cast<int>(pos));
    const float frac = static_cast<float>(pos - lo);
    out.values.col(t) = (1.0f - frac) * x.values.col(lo) + frac * x.values.col(lo + 1);
  }
  // interpolation above lands exactly on the endpoints, but pin them anyway
  out.values.col(0) = x.values.col(0);
  out.values.col(target_frames - 1) = x.values.col(t_in - 1);
  return out;
}

LogMelSpectrogram random_resample(const LogMelSpectrogram& x, Rng& rng,
                                  const RandomResampleParams& params) {
  if (params.seg_min < 1 || params.seg_max < params.seg_min) {
    throw std::invalid_argument("random_resample: bad segment bounds");
  }
  if (!(params.rate_min > 0.0 && params.rate_max >= params.rate_min)) {
    throw std::invalid_argument("random_resample: bad rate bounds");
  }
  const int t_in = x.frames();
  if (t_in < 1) throw ValidationError("random_resample: empty input");

  std::vector<MatF> pieces;
  int pos = 0;
  long long total = 0;
  while (pos < t_in) {
    const int want = static_cast<int>(uniform_int(rng, params.seg_min, params.seg_max));
    const int seg_len = std::min(want, t_in - pos);
    const double rate = uniform_real(rng, params.rate_min, params.rate_max);
    const int out_len = std::max(1, static_cast<int>(std::lround(seg_len * rate)));

    LogMelSpectrogram seg = x;
    seg.values = x.values.middleCols(pos, seg_len);
    pieces.push_back(time_stretch(seg, out_len).values);
    total += out_len;
    pos += seg_len;
  }

  LogMelSpectrogram out = x;
  out.values.resize(x.values.rows(), total);
  int at = 0;
  for (const MatF& piece : pieces) {
    out.values.middleCols(at, piece.cols()) = piece;
    at += static_cast<int>(piece.cols());
  }
  return out;
}

LinearSpectrogram mel_invert(const LogMelSpectrogram& x, const MelFilterbank& bank,
                             int fft_size) {
  if (!x.values.allFinite()) throw ValidationError("mel_invert: non-finite input");
  const int bins = fft_size / 2 + 1;
  if (bank.weights.rows() != x.values.rows() || bank.weights.cols() != bins) {
    throw std::invalid_argument("mel_invert: filterbank shape mismatch");
  }

  const MatD mel = x.values.cast<double>().array().exp().matrix();  // n_mels x T
  const MatD weights = bank.weights.cast<double>();                 // n_mels x bins

  // Row-space least-squares solution, clamped to be nonnegative.
  const MatD gram = weights * weights.transpose();  // n_mels x n_mels
  MatD linear = weights.transpose() * gram.ldlt().solve(mel);
  linear = linear.cwiseMax(0.0);

  // Multiplicative updates keep nonnegativity and shrink ||W*linear - mel||.
  const MatD numer = weights.transpose() * mel;  // bins x T
  for (int it = 0; it < 40; ++it) {
    MatD denom = weights.transpose() * (weights * linear);
    linear.array() *= numer.array() / (denom.array() + 1e-12);
  }

  LinearSpectrogram out;
  out.fft_size = fft_size;
  out.hop = x.hop;
  out.sample_rate = x.sample_rate;
  out.magnitudes = linear.cast<float>();
  return out;
}

Waveform griffin_lim(const LinearSpectrogram& spec, int iterations,
                     std::optional<std::uint64_t> phase_seed) {
  if (iterations < 0) throw std::invalid_argument("griffin_lim: iterations must be >= 0");
  const int frames = spec.frames();
  const int bins = spec.bins();
  const int fft_size = spec.fft_size;

  ComplexSpec current(frames, std::vector<std::complex<double>>(bins));
  if (phase_seed.has_value()) {
    Rng rng(*phase_seed);
    for (int t = 0; t < frames; ++t) {
      for (int b = 0; b < bins; ++b) {
        const double phi = uniform_real(rng, -kPi, kPi);
        current[t][b] = std::polar(static_cast<double>(spec.magnitudes(b, t)), phi);
      }
    }
  } else {
    for (int t = 0; t < frames; ++t) {
      for (int b = 0; b < bins; ++b) {
        current[t][b] = {static_cast<double>(spec.magnitudes(b, t)), 0.0};
      }
    }
  }

  std::vector<float> x;
  for (int it = 0; it < iterations; ++it) {
    x = istft(current, fft_size, spec.hop);
    const ComplexSpec est = stft_complex(x, fft_size, spec.hop);
    const int usable = std::min<int>(frames, static_cast<int>(est.size()));
    for (int t = 0; t < usable; ++t) {
      for (int b = 0; b < bins; ++b) {
        const double mag = std::abs(est[t][b]);
        const std::complex<double> phase = mag > 1e-16 ? est[t][b] / mag : 1.0;
        current[t][b] = phase * static_cast<double>(spec.magnitudes(b, t));
      }
    }
  }
  x = istft(current, fft_size, spec.hop);

  Waveform out;
  out.sample_rate = spec.sample_rate;
  out.samples = std::move(x);
  return out;
}

LogMelSpectrogram logmel_of_wave(const Waveform& wave, const DspConfig& cfg) {
  const Waveform at_rate =
      wave.sample_rate == cfg.sample_rate ? wave : resample_audio(wave, cfg.sample_rate);
  const LinearSpectrogram spec = stft_magnitude(at_rate, cfg.fft_size, cfg.hop);
  const MelFilterbank bank =
      MelFilterbank::make(cfg.n_mels, cfg.fft_size, cfg.sample_rate, cfg.fmin, cfg.effective_fmax());
  return log_compress(mel_project(spec, bank), cfg.floor_eps, cfg.hop, cfg.sample_rate);
}

}  // namespace sts::dsp
