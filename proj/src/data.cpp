#include "sts/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sts::data {

namespace {

// Frames whose centers fall in [start, end): center of frame t is t*hop/sr.
// first = ceil(start*sr/hop), one past last = ceil(end*sr/hop).
int first_frame_at_or_after(double t_sec, int hop, int sr) {
  return static_cast<int>(std::ceil(t_sec * sr / hop - 1e-9));
}

int frames_in_span(double start, double end, int hop, int sr) {
  return std::max(0, first_frame_at_or_after(end, hop, sr) -
                         first_frame_at_or_after(start, hop, sr));
}

}  // namespace

PhoneAnnotation PhoneAnnotation::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open phone annotation: " + path);
  PhoneAnnotation ann;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream ss(line);
    Entry e;
    if (!(ss >> e.label >> e.start >> e.end)) {
      throw ParseError("malformed phone line in " + path, line_no);
    }
    ann.entries.push_back(e);
  }
  ann.validate();
  return ann;
}

void PhoneAnnotation::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Entry& e = entries[i];
    if (!(e.end > e.start)) {
      throw ValidationError("phone '" + e.label + "' has end <= start");
    }
    if (i > 0 && e.start < entries[i - 1].end - 1e-9) {
      throw ValidationError("phone entries overlap or are out of order at index " +
                            std::to_string(i));
    }
  }
}

void PairedExample::validate() const {
  if (speech.frames() != singing.frames() || contour.frames() != singing.frames()) {
    throw ValidationError("paired example '" + id + "': frame counts differ (speech " +
                          std::to_string(speech.frames()) + ", singing " +
                          std::to_string(singing.frames()) + ", contour " +
                          std::to_string(contour.frames()) + ")");
  }
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest: " + path);
  Manifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed manifest JSON: ") + e.what(), line_no);
    }
    if (!rec.is_object()) throw ParseError("manifest record is not an object", line_no);
    for (const auto& [key, _] : rec.items()) {
      if (key != "speech" && key != "singing" && key != "speech_phones" &&
          key != "singing_phones") {
        throw ValidationError("unknown manifest key '" + key + "' at line " +
                              std::to_string(line_no));
      }
    }
    if (!rec.contains("singing") || !rec["singing"].is_string() ||
        rec["singing"].get<std::string>().empty()) {
      throw ValidationError("manifest record missing 'singing' at line " +
                            std::to_string(line_no));
    }

    ManifestRecord r;
    r.line = line_no;
    r.singing = rec["singing"].get<std::string>();
    if (rec.contains("speech")) r.speech = rec["speech"].get<std::string>();
    if (rec.contains("speech_phones")) r.speech_phones = rec["speech_phones"].get<std::string>();
    if (rec.contains("singing_phones"))
      r.singing_phones = rec["singing_phones"].get<std::string>();

    std::string missing;
    for (const std::string& p : {r.singing, r.speech, r.speech_phones, r.singing_phones}) {
      if (!p.empty() && !std::filesystem::exists(p)) {
        missing = p;
        break;
      }
    }
    if (!missing.empty()) {
      manifest.record_errors.push_back("line " + std::to_string(line_no) +
                                       ": unreadable path: " + missing);
      continue;
    }
    (r.speech.empty() ? manifest.unpaired : manifest.paired).push_back(std::move(r));
  }
  return manifest;
}

dsp::LogMelSpectrogram remove_silence(const dsp::LogMelSpectrogram& mel,
                                      const PhoneAnnotation& phones,
                                      const std::set<std::string>& silence_labels) {
  phones.validate();
  const double duration = static_cast<double>(mel.frames()) * mel.hop / mel.sample_rate;
  for (const auto& e : phones.entries) {
    if (e.end > duration + static_cast<double>(mel.hop) / mel.sample_rate) {
      throw ValidationError("phone '" + e.label + "' extends past the audio (" +
                            std::to_string(e.end) + "s > " + std::to_string(duration) + "s)");
    }
  }

  std::vector<int> keep;
  keep.reserve(mel.frames());
  for (int t = 0; t < mel.frames(); ++t) {
    const double center = static_cast<double>(t) * mel.hop / mel.sample_rate;
    bool silent = false;
    for (const auto& e : phones.entries) {
      if (silence_labels.count(e.label) && center >= e.start && center < e.end) {
        silent = true;
        break;
      }
    }
    if (!silent) keep.push_back(t);
  }

  dsp::LogMelSpectrogram out = mel;
  out.values.resize(mel.values.rows(), static_cast<int>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) out.values.col(static_cast<int>(i)) = mel.values.col(keep[i]);
  return out;
}

std::vector<Waveform> filter_long_silence(const Waveform& wave, const melody::F0Track& f0,
                                          double max_silence) {
  f0.validate();
  if (f0.size() == 0) return {wave};
  const double hop_sec = f0.size() > 1 ? f0.times[1] - f0.times[0]
                                       : wave.duration_sec();

  // unvoiced runs longer than max_silence, as [start_sec, end_sec) cuts
  std::vector<std::pair<double, double>> cuts;
  std::size_t i = 0;
  while (i < f0.size()) {
    if (f0.voicing[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < f0.size() && !f0.voicing[j + 1]) ++j;
    const double start = f0.times[i];
    const double end = f0.times[j] + hop_sec;
    if (end - start > max_silence) cuts.emplace_back(start, end);
    i = j + 1;
  }
  if (cuts.empty()) return {wave};

  std::vector<Waveform> segments;
  long long pos = 0;
  const long long n = static_cast<long long>(wave.samples.size());
  auto emit = [&](long long from, long long to) {
    from = std::clamp<long long>(from, 0, n);
    to = std::clamp<long long>(to, 0, n);
    if (to <= from) return;
    Waveform seg;
    seg.sample_rate = wave.sample_rate;
    seg.samples.assign(wave.samples.begin() + from, wave.samples.begin() + to);
    segments.push_back(std::move(seg));
  };
  for (const auto& [start, end] : cuts) {
    emit(pos, std::llround(start * wave.sample_rate));
    pos = std::llround(end * wave.sample_rate);
  }
  emit(pos, n);
  return segments;
}

dsp::LogMelSpectrogram phoneme_sync_stretch(const dsp::LogMelSpectrogram& speech,
                                            const PhoneAnnotation& speech_phones,
                                            const PhoneAnnotation& singing_phones,
                                            const std::set<std::string>& silence_labels) {
  speech_phones.validate();
  singing_phones.validate();

  std::vector<const PhoneAnnotation::Entry*> speech_voiced, singing_voiced;
  for (const auto& e : speech_phones.entries) {
    if (!silence_labels.count(e.label)) speech_voiced.push_back(&e);
  }
  for (const auto& e : singing_phones.entries) {
    if (!silence_labels.count(e.label)) singing_voiced.push_back(&e);
  }
  const std::size_t pairs = std::min(speech_voiced.size(), singing_voiced.size());
  for (std::size_t i = 0; i < pairs; ++i) {
    if (speech_voiced[i]->label != singing_voiced[i]->label) {
      throw ValidationError("phone label mismatch at index " + std::to_string(i) + ": '" +
                            speech_voiced[i]->label + "' vs '" + singing_voiced[i]->label +
                            "'");
    }
  }
  if (speech_voiced.size() != singing_voiced.size()) {
    throw ValidationError("phone label mismatch at index " + std::to_string(pairs) +
                          ": sequence lengths differ (" +
                          std::to_string(speech_voiced.size()) + " vs " +
                          std::to_string(singing_voiced.size()) + ")");
  }

  const int hop = speech.hop;
  const int sr = speech.sample_rate;
  const float floor_value = speech.floor_value();

  // total output frames: sum over all singing entries of their frame counts
  std::vector<MatF> pieces;
  std::size_t voiced_idx = 0;
  for (const auto& e : singing_phones.entries) {
    const int target = frames_in_span(e.start, e.end, hop, sr);
    if (target == 0) {
      if (!silence_labels.count(e.label)) ++voiced_idx;
      continue;
    }
    if (silence_labels.count(e.label)) {
      pieces.push_back(MatF::Constant(speech.values.rows(), target, floor_value));
      continue;
    }
    const auto* src = speech_voiced[voiced_idx++];
    const int s0 = std::min(first_frame_at_or_after(src->start, hop, sr), speech.frames());
    const int len = std::min(frames_in_span(src->start, src->end, hop, sr),
                             speech.frames() - s0);
    if (len <= 0) {
      pieces.push_back(MatF::Constant(speech.values.rows(), target, floor_value));
      continue;
    }
    dsp::LogMelSpectrogram span = speech;
    span.values = speech.values.middleCols(s0, len);
    pieces.push_back(dsp::time_stretch(span, target).values);
  }

  long long total = 0;
  for (const auto& p : pieces) total += p.cols();
  dsp::LogMelSpectrogram out = speech;
  out.values.resize(speech.values.rows(), total);
  int at = 0;
  for (const auto& p : pieces) {
    out.values.middleCols(at, p.cols()) = p;
    at += static_cast<int>(p.cols());
  }
  return out;
}

std::optional<PairedExample> prepare_paired(const Waveform& speech_wave,
                                            const Waveform& singing_wave,
                                            const std::optional<PhoneAnnotation>& speech_phones,
                                            const std::optional<PhoneAnnotation>& singing_phones,
                                            const PrepareConfig& cfg, Rng& rng) {
  if (speech_wave.samples.empty() || singing_wave.samples.empty()) {
    throw ValidationError("prepare_paired: empty input audio");
  }
  const dsp::LogMelSpectrogram singing = dsp::logmel_of_wave(singing_wave, cfg.dsp);
  const Waveform singing_at_rate = singing_wave.sample_rate == cfg.dsp.sample_rate
                                       ? singing_wave
                                       : dsp::resample_audio(singing_wave, cfg.dsp.sample_rate);
  const melody::F0Track f0 = melody::estimate_f0(singing_at_rate, cfg.dsp.hop);
  const melody::MelodyContour contour =
      melody::contour_from_f0(f0, singing.frames(), cfg.dsp.hop, cfg.dsp.sample_rate);

  dsp::LogMelSpectrogram speech = dsp::logmel_of_wave(speech_wave, cfg.dsp);
  if (cfg.phsync && speech_phones && singing_phones) {
    speech = phoneme_sync_stretch(speech, *speech_phones, *singing_phones, cfg.silence_labels);
  } else if (speech_phones) {
    speech = remove_silence(speech, *speech_phones, cfg.silence_labels);
  }
  if (speech.frames() == 0) return std::nullopt;
  const double kept_sec = static_cast<double>(speech.frames()) * cfg.dsp.hop / cfg.dsp.sample_rate;
  if (kept_sec < cfg.min_duration_sec) return std::nullopt;

  if (cfg.random_resample && !cfg.phsync) {
    speech = dsp::random_resample(speech, rng);
  }
  speech = dsp::time_stretch(speech, singing.frames());

  PairedExample ex;
  ex.speech = std::move(speech);
  ex.singing = singing;
  ex.contour = contour;
  ex.paired = true;
  ex.validate();
  return ex;
}

std::optional<PairedExample> prepare_unpaired(const Waveform& singing_wave,
                                              const PrepareConfig& cfg, Rng& rng) {
  auto ex = prepare_paired(singing_wave, singing_wave, std::nullopt, std::nullopt, cfg, rng);
  if (ex) ex->paired = false;
  return ex;
}

int synthetic_pitch_row(const SyntheticParams& params, int note) {
  const dsp::MelFilterbank bank = dsp::MelFilterbank::make(
      params.n_mels, params.fft_size, params.sample_rate, 0.0, params.sample_rate / 2.0);
  const double freq = melody::midi_to_hz(note);
  int best = 0;
  double best_dist = std::abs(bank.center_freqs_hz[0] - freq);
  for (int m = 1; m < params.n_mels; ++m) {
    const double d = std::abs(bank.center_freqs_hz[m] - freq);
    if (d < best_dist) {
      best_dist = d;
      best = m;
    }
  }
  return best;
}

PairedExample make_synthetic_pair(Rng& rng, const SyntheticParams& params) {
  if (params.n_notes <= 0 || params.frames_per_note <= 0 || params.n_mels <= 0) {
    throw std::invalid_argument("make_synthetic_pair: params must be positive");
  }
  const int total = params.n_notes * params.frames_per_note;
  const float floor_value = std::log(params.floor_eps);

  // note sequence on a uniform grid
  std::vector<int> notes(params.n_notes);
  for (int& n : notes) {
    n = static_cast<int>(uniform_int(rng, params.note_min, params.note_max));
  }

  // formant-like band patterns, one per note segment, at uniform tempo
  MatF speech = MatF::Constant(params.n_mels, total, floor_value);
  const int band_lo = params.n_mels / 4;
  const int band_hi = 3 * params.n_mels / 4;
  for (int p = 0; p < params.n_notes; ++p) {
    const int f1 = static_cast<int>(uniform_int(rng, band_lo, (band_lo + band_hi) / 2 - 1));
    const int f2 = static_cast<int>(uniform_int(rng, (band_lo + band_hi) / 2, band_hi - 1));
    const float level = static_cast<float>(uniform_real(rng, -3.5, -2.5));
    for (int t = p * params.frames_per_note; t < (p + 1) * params.frames_per_note; ++t) {
      const float wiggle =
          0.3f * std::sin(2.0f * 3.14159265f * (t % params.frames_per_note) /
                          params.frames_per_note);
      for (int row : {f1, f2}) {
        speech(row, t) = level + wiggle;
        if (row > 0) speech(row - 1, t) = std::max(speech(row - 1, t), level + wiggle - 1.5f);
        if (row + 1 < params.n_mels)
          speech(row + 1, t) = std::max(speech(row + 1, t), level + wiggle - 1.5f);
      }
    }
  }

  // re-time the same patterns onto random per-note durations summing to total
  std::vector<int> durations(params.n_notes);
  {
    std::vector<double> weights(params.n_notes);
    double sum = 0.0;
    for (double& w : weights) {
      w = uniform_real(rng, 0.5, 2.0);
      sum += w;
    }
    int assigned = 0;
    for (int p = 0; p < params.n_notes; ++p) {
      durations[p] = std::max(2, static_cast<int>(std::lround(total * weights[p] / sum)));
      assigned += durations[p];
    }
    durations.back() += total - assigned;  // fix rounding drift on the last note
    if (durations.back() < 2) {
      int deficit = 2 - durations.back();
      durations.back() = 2;
      for (int p = 0; deficit > 0 && p < params.n_notes - 1; ++p) {
        const int give = std::min(deficit, durations[p] - 2);
        durations[p] -= give;
        deficit -= give;
      }
    }
  }

  MatF singing(params.n_mels, total);
  int at = 0;
  for (int p = 0; p < params.n_notes; ++p) {
    dsp::LogMelSpectrogram block;
    block.values = speech.middleCols(p * params.frames_per_note, params.frames_per_note);
    block.hop = params.hop;
    block.sample_rate = params.sample_rate;
    block.floor_eps = params.floor_eps;
    singing.middleCols(at, durations[p]) = dsp::time_stretch(block, durations[p]).values;
    at += durations[p];
  }

  // pitch ridge on the contour grid; argmax of every singing frame is the ridge
  melody::MelodyContour contour;
  contour.frame_hop = params.hop;
  contour.sample_rate = params.sample_rate;
  contour.onehot = MatF::Zero(128, total);
  for (int t = 0; t < total; ++t) {
    const int note = notes[std::min(t / params.frames_per_note, params.n_notes - 1)];
    contour.onehot(note, t) = 1.0f;
    const int row = synthetic_pitch_row(params, note);
    singing(row, t) = 1.5f;
    if (row > 0) singing(row - 1, t) = std::max(singing(row - 1, t), 0.0f);
    if (row + 1 < params.n_mels) singing(row + 1, t) = std::max(singing(row + 1, t), 0.0f);
  }

  PairedExample ex;
  ex.speech = {std::move(speech), params.hop, params.sample_rate, params.floor_eps};
  ex.singing = {std::move(singing), params.hop, params.sample_rate, params.floor_eps};
  ex.contour = std::move(contour);
  ex.paired = true;
  ex.validate();
  return ex;
}

}  // namespace sts::data
