#ifndef STS_TESTS_ORACLES_HPP
#define STS_TESTS_ORACLES_HPP

// Test-side reference implementations, kept independent of the library code
// they are used to check.

#include <cmath>
#include <vector>

#include "sts/wav.hpp"

namespace oracles {

inline sts::Waveform sine(double freq, double seconds, int sample_rate, double amp = 0.5) {
  sts::Waveform w;
  w.sample_rate = sample_rate;
  const long long n = std::llround(seconds * sample_rate);
  w.samples.resize(n);
  for (long long i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(amp * std::sin(2.0 * M_PI * freq * i / sample_rate));
  }
  return w;
}

/// Plain autocorrelation pitch estimate over the whole signal: argmax of
/// r(tau) in the lag range, refined parabolically. Only good for clean
/// periodic signals, which is exactly what the tests feed it.
inline double autocorr_pitch(const sts::Waveform& w, double fmin = 50.0, double fmax = 1000.0) {
  const int sr = w.sample_rate;
  const int lag_min = static_cast<int>(sr / fmax);
  const int lag_max = static_cast<int>(sr / fmin);
  const int n = static_cast<int>(w.samples.size());
  if (n < 2 * lag_max) return 0.0;

  // use a centered window to dodge edge transients
  const int win = std::min(n - lag_max, 4096);
  const int start = (n - win - lag_max) / 2;
  std::vector<double> r(lag_max + 1, 0.0);
  for (int lag = lag_min; lag <= lag_max; ++lag) {
    double acc = 0.0;
    for (int i = 0; i < win; ++i) {
      acc += static_cast<double>(w.samples[start + i]) * w.samples[start + i + lag];
    }
    r[lag] = acc;
  }
  int best = lag_min;
  for (int lag = lag_min + 1; lag <= lag_max; ++lag) {
    if (r[lag] > r[best]) best = lag;
  }
  double lag = best;
  if (best > lag_min && best < lag_max) {
    const double a = r[best - 1], b = r[best], c = r[best + 1];
    const double denom = a - 2.0 * b + c;
    if (std::abs(denom) > 1e-12) lag = best + 0.5 * (a - c) / denom;
  }
  return lag > 0.0 ? sr / lag : 0.0;
}

}  // namespace oracles

#endif  // STS_TESTS_ORACLES_HPP
