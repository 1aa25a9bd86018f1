#ifndef STS_DATA_HPP
#define STS_DATA_HPP

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sts/dsp.hpp"
#include "sts/melody.hpp"
#include "sts/wav.hpp"

namespace sts::data {

/// Time-ordered, non-overlapping phone spans in seconds.
struct PhoneAnnotation {
  struct Entry {
    std::string label;
    double start = 0.0;
    double end = 0.0;
  };
  std::vector<Entry> entries;

  /// Text format: one "label start_sec end_sec" per line, '#' comments ignored.
  static PhoneAnnotation load(const std::string& path);
  void validate() const;
};

inline const std::set<std::string>& default_silence_labels() {
  static const std::set<std::string> labels = {"sil", "sp", "br"};
  return labels;
}

/// A training example after preparation: equal speech/singing/contour frame
/// counts. For unpaired (singing-only) records the speech slot holds the
/// rhythm-perturbed singing itself and `paired` is false, so the supervised
/// L1 term is skipped.
struct PairedExample {
  dsp::LogMelSpectrogram speech;
  dsp::LogMelSpectrogram singing;
  melody::MelodyContour contour;
  bool paired = true;
  std::string id;

  void validate() const;
};

struct ManifestRecord {
  std::string speech;  // empty => unpaired
  std::string singing;
  std::string speech_phones;
  std::string singing_phones;
  int line = 0;
};

struct Manifest {
  std::vector<ManifestRecord> paired;
  std::vector<ManifestRecord> unpaired;
  std::vector<std::string> record_errors;  // unreadable paths, one message per record
};

/// JSON-lines manifest, one record per line with keys `singing` (required),
/// `speech`, `speech_phones`, `singing_phones`. Malformed JSON or schema
/// violations are hard errors; unreadable referenced files are collected in
/// record_errors and the record is dropped.
Manifest load_manifest(const std::string& path);

/// Drops frames whose centers fall inside silence-labeled spans.
dsp::LogMelSpectrogram remove_silence(const dsp::LogMelSpectrogram& mel,
                                      const PhoneAnnotation& phones,
                                      const std::set<std::string>& silence_labels =
                                          default_silence_labels());

/// Cuts unvoiced stretches longer than max_silence seconds and returns the
/// retained regions as separate waveforms.
std::vector<Waveform> filter_long_silence(const Waveform& wave, const melody::F0Track& f0,
                                          double max_silence = 1.0);

/// Stretches each speech phone span to the frame count of its singing
/// counterpart (labels must match after dropping silence entries); singing
/// silence spans become floor-valued frames. Output length is exactly the
/// singing annotation's total frame count.
dsp::LogMelSpectrogram phoneme_sync_stretch(const dsp::LogMelSpectrogram& speech,
                                            const PhoneAnnotation& speech_phones,
                                            const PhoneAnnotation& singing_phones,
                                            const std::set<std::string>& silence_labels =
                                                default_silence_labels());

struct PrepareConfig {
  dsp::DspConfig dsp;
  bool random_resample = false;  // training-time rhythm augmentation
  bool phsync = false;           // oracle phone-duration alignment
  double min_duration_sec = 0.0; // skip shorter speech (post silence removal)
  std::set<std::string> silence_labels = default_silence_labels();
};

/// Full preparation of one record: silence removal (when phones are given),
/// log-mel extraction, contour from the singing, optional random resampling,
/// and time stretching of the speech to the singing length. Returns nullopt
/// when the example should be skipped (empty or too short after cleanup).
std::optional<PairedExample> prepare_paired(const Waveform& speech_wave,
                                            const Waveform& singing_wave,
                                            const std::optional<PhoneAnnotation>& speech_phones,
                                            const std::optional<PhoneAnnotation>& singing_phones,
                                            const PrepareConfig& cfg, Rng& rng);

/// Same pipeline for a singing-only record: the generator input is the
/// singing itself, rhythm-perturbed when random_resample is on.
std::optional<PairedExample> prepare_unpaired(const Waveform& singing_wave,
                                              const PrepareConfig& cfg, Rng& rng);

struct SyntheticParams {
  int n_notes = 4;
  int frames_per_note = 32;
  int n_mels = 80;
  int note_min = 55;
  int note_max = 79;
  int sample_rate = 22050;
  int hop = 276;
  int fft_size = 1024;
  float floor_eps = 1e-5f;
};

/// Mel row carrying the harmonic ridge for a MIDI note under these params.
int synthetic_pitch_row(const SyntheticParams& params, int note);

/// Deterministic-given-seed toy pair: "speech" is a sequence of formant-like
/// band patterns at uniform tempo; "singing" re-times the same patterns onto
/// random durations and adds a pitch ridge following the contour.
PairedExample make_synthetic_pair(Rng& rng, const SyntheticParams& params = {});

}  // namespace sts::data

#endif  // STS_DATA_HPP
