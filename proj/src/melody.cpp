#include "sts/melody.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace sts::melody {

void F0Track::validate() const {
  if (f0_hz.size() != times.size() || voicing.size() != times.size()) {
    throw ValidationError("F0Track: sequence lengths differ");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw ValidationError("F0Track: times not strictly increasing at index " +
                            std::to_string(i));
    }
    const bool voiced = voicing[i] != 0;
    if (voiced != (f0_hz[i] > 0.0)) {
      throw ValidationError("F0Track: voicing flag inconsistent with f0 at index " +
                            std::to_string(i));
    }
  }
}

int hz_to_midi(double f0) {
  if (f0 < 0.0) throw std::invalid_argument("hz_to_midi: negative frequency");
  if (f0 == 0.0) return kRest;
  const double note = 69.0 + 12.0 * std::log2(f0 / 440.0);
  const int rounded = static_cast<int>(std::floor(note + 0.5));  // round half up
  return std::clamp(rounded, 0, 127);
}

double midi_to_hz(int note) { return 440.0 * std::pow(2.0, (note - 69) / 12.0); }

F0Track estimate_f0(const Waveform& wave, int frame_hop, double fmin, double fmax) {
  if (wave.samples.empty()) throw std::invalid_argument("estimate_f0: empty waveform");
  if (frame_hop <= 0) throw std::invalid_argument("estimate_f0: hop must be > 0");
  if (!(fmin > 0.0 && fmax > fmin)) throw std::invalid_argument("estimate_f0: bad f0 range");

  const int sr = wave.sample_rate;
  const long long len = static_cast<long long>(wave.samples.size());
  const int tau_min = std::max(2, static_cast<int>(sr / fmax));
  const int tau_max = static_cast<int>(std::ceil(sr / fmin));
  const int window = tau_max;          // integration window
  const int span = window + tau_max;   // samples consumed per frame
  const int frames = static_cast<int>(std::max<long long>(1, (len + frame_hop - 1) / frame_hop));
  constexpr double kThreshold = 0.15;
  constexpr double kSilenceRms = 1e-4;

  F0Track track;
  track.times.resize(frames);
  track.f0_hz.assign(frames, 0.0);
  track.voicing.assign(frames, 0);

  std::vector<double> diff(tau_max + 1, 0.0), cmnd(tau_max + 1, 0.0);
  for (int i = 0; i < frames; ++i) {
    track.times[i] = static_cast<double>(i) * frame_hop / sr;
    // slide the analysis window inward at the edges so every frame sees
    // a full span of real samples
    long long start = static_cast<long long>(i) * frame_hop - window / 2;
    start = std::clamp<long long>(start, 0, std::max<long long>(0, len - span));
    const long long avail = len - start;
    if (avail < 2 * tau_min) continue;
    const int w = static_cast<int>(std::min<long long>(window, avail / 2));
    const int t_hi = static_cast<int>(std::min<long long>(tau_max, avail - w));
    if (t_hi <= tau_min) continue;
    const float* x = wave.samples.data() + start;

    double energy = 0.0;
    for (int j = 0; j < w; ++j) energy += static_cast<double>(x[j]) * x[j];
    if (std::sqrt(energy / w) < kSilenceRms) continue;

    double running = 0.0;
    diff[0] = 0.0;
    cmnd[0] = 1.0;
    for (int tau = 1; tau <= t_hi; ++tau) {
      double d = 0.0;
      for (int j = 0; j < w; ++j) {
        const double delta = static_cast<double>(x[j]) - x[j + tau];
        d += delta * delta;
      }
      diff[tau] = d;
      running += d;
      cmnd[tau] = running > 0.0 ? d * tau / running : 1.0;
    }

    int best = -1;
    for (int tau = tau_min; tau <= t_hi; ++tau) {
      if (cmnd[tau] < kThreshold) {
        while (tau + 1 <= t_hi && cmnd[tau + 1] < cmnd[tau]) ++tau;  // descend to local min
        best = tau;
        break;
      }
    }
    if (best < 0) continue;

    double tau_refined = best;
    if (best > tau_min && best < t_hi) {
      const double a = cmnd[best - 1], b = cmnd[best], c = cmnd[best + 1];
      const double denom = a - 2.0 * b + c;
      if (std::abs(denom) > 1e-12) tau_refined = best + 0.5 * (a - c) / denom;
    }
    const double f0 = sr / tau_refined;
    if (f0 >= fmin && f0 <= fmax) {
      track.f0_hz[i] = f0;
      track.voicing[i] = 1;
    }
  }
  return track;
}

MelodyContour contour_from_f0(const F0Track& track, int n_frames, int frame_hop,
                              int sample_rate) {
  if (n_frames <= 0) throw std::invalid_argument("contour_from_f0: n_frames must be > 0");
  if (track.size() == 0) throw ValidationError("contour_from_f0: empty track");
  track.validate();

  MelodyContour contour;
  contour.frame_hop = frame_hop;
  contour.sample_rate = sample_rate;
  contour.onehot = MatF::Zero(128, n_frames);
  std::size_t cursor = 0;
  for (int t = 0; t < n_frames; ++t) {
    const double when = static_cast<double>(t) * frame_hop / sample_rate;
    while (cursor + 1 < track.size() &&
           std::abs(track.times[cursor + 1] - when) <= std::abs(track.times[cursor] - when)) {
      ++cursor;
    }
    const int note = track.voicing[cursor] ? hz_to_midi(track.f0_hz[cursor]) : kRest;
    contour.onehot(note == kRest ? kRestRow : note, t) = 1.0f;
  }
  return contour;
}

F0Track load_f0_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open F0 file: " + path);

  F0Track track;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    double t, f0;
    if (!(ss >> t >> f0)) {
      throw ParseError("malformed F0 line in " + path, line_no);
    }
    std::string trailing;
    if (ss >> trailing && !trailing.empty() && trailing[0] != '#') {
      throw ParseError("unexpected trailing content in " + path, line_no);
    }
    if (f0 < 0.0) throw ParseError("negative f0 in " + path, line_no);
    if (!track.times.empty() && !(t > track.times.back())) {
      throw ValidationError("F0 times not strictly increasing in " + path + " at line " +
                            std::to_string(line_no));
    }
    track.times.push_back(t);
    track.f0_hz.push_back(f0);
    track.voicing.push_back(f0 > 0.0 ? 1 : 0);
  }
  if (track.times.empty()) throw ValidationError("F0 file has no data points: " + path);
  return track;
}

void save_f0_file(const std::string& path, const F0Track& track) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write F0 file: " + path);
  char buf[64];
  for (std::size_t i = 0; i < track.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f %.4f\n", track.times[i], track.f0_hz[i]);
    out << buf;
  }
}

std::vector<int> contour_notes(const MelodyContour& contour) {
  std::vector<int> notes(contour.frames());
  for (int t = 0; t < contour.frames(); ++t) {
    int row = 0;
    contour.onehot.col(t).maxCoeff(&row);
    notes[t] = row;
  }
  return notes;
}

F0Track contour_to_f0(const MelodyContour& contour) {
  F0Track track;
  const std::vector<int> notes = contour_notes(contour);
  track.times.resize(notes.size());
  track.f0_hz.resize(notes.size());
  track.voicing.resize(notes.size());
  for (std::size_t t = 0; t < notes.size(); ++t) {
    track.times[t] = static_cast<double>(t) * contour.frame_hop / contour.sample_rate;
    const bool rest = notes[t] == kRestRow;
    track.f0_hz[t] = rest ? 0.0 : midi_to_hz(notes[t]);
    track.voicing[t] = rest ? 0 : 1;
  }
  return track;
}

}  // namespace sts::melody
