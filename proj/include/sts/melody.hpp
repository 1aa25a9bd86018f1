#ifndef STS_MELODY_HPP
#define STS_MELODY_HPP

#include <string>
#include <vector>

#include "sts/common.hpp"
#include "sts/wav.hpp"

namespace sts::melody {

/// Sentinel returned by hz_to_midi for unvoiced input.
constexpr int kRest = -1;

/// Contour row that encodes a rest. MIDI note 0 (8.18 Hz) is unsingable, so
/// the row doubles as the unvoiced slot without changing the 128-row shape.
constexpr int kRestRow = 0;

/// Time-stamped F0 sequence. f0_hz[i] > 0 iff voicing[i]; times are strictly
/// increasing seconds.
struct F0Track {
  std::vector<double> times;
  std::vector<double> f0_hz;
  std::vector<std::uint8_t> voicing;

  std::size_t size() const { return times.size(); }
  void validate() const;
};

/// One-hot MIDI notes per frame, 128 x frames; every column sums to 1.
struct MelodyContour {
  MatF onehot;
  int frame_hop = 0;
  int sample_rate = 0;

  int frames() const { return static_cast<int>(onehot.cols()); }
};

/// f0 = 0 maps to kRest; otherwise round(69 + 12*log2(f0/440)), clamped to
/// [0, 127]. Negative input is an error.
int hz_to_midi(double f0);

double midi_to_hz(int note);

/// YIN-style normalized-autocorrelation pitch tracking, one estimate per hop.
/// Frames without sufficient periodicity (or below the silence floor) are
/// unvoiced. Silence yields a fully unvoiced track, never an error.
F0Track estimate_f0(const Waveform& wave, int frame_hop, double fmin = 50.0,
                    double fmax = 1000.0);

/// Resamples the track onto an n_frames grid (nearest time) and one-hot
/// encodes per-frame MIDI notes; rests land on kRestRow.
MelodyContour contour_from_f0(const F0Track& track, int n_frames, int frame_hop,
                              int sample_rate);

/// Text format: one "time_sec f0_hz" pair per line, f0 = 0 for unvoiced,
/// '#' comments and blank lines ignored.
F0Track load_f0_file(const std::string& path);

void save_f0_file(const std::string& path, const F0Track& track);

/// Per-column note rows (argmax). kRestRow columns come back as kRestRow.
std::vector<int> contour_notes(const MelodyContour& contour);

/// Converts a contour back to a frame-aligned track (kRestRow -> unvoiced).
F0Track contour_to_f0(const MelodyContour& contour);

}  // namespace sts::melody

#endif  // STS_MELODY_HPP
