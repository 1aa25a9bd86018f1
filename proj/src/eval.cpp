#include "sts/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "sts/mel_io.hpp"

namespace sts::eval {

namespace {

constexpr double kDbPerNat = 20.0 / 2.302585092994046;  // 20 / ln(10)

}  // namespace

double lsd(const MatD& y_true, const MatD& y_pred, const std::vector<double>& bin_freqs_hz,
           double f_lo, double f_hi) {
  if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols()) {
    throw ValidationError("lsd: spectrogram shapes differ");
  }
  if (static_cast<std::size_t>(y_true.rows()) != bin_freqs_hz.size()) {
    throw ValidationError("lsd: bin frequency list does not match row count");
  }
  std::vector<int> bins;
  for (std::size_t b = 0; b < bin_freqs_hz.size(); ++b) {
    if (bin_freqs_hz[b] >= f_lo && bin_freqs_hz[b] <= f_hi) bins.push_back(static_cast<int>(b));
  }
  if (bins.empty()) throw ValidationError("lsd: no bins inside the requested band");

  const int frames = static_cast<int>(y_true.cols());
  if (frames == 0) throw ValidationError("lsd: empty spectrograms");
  double total = 0.0;
  for (int t = 0; t < frames; ++t) {
    double sq = 0.0;
    for (int b : bins) {
      const double diff = kDbPerNat * (y_true(b, t) - y_pred(b, t));
      sq += diff * diff;
    }
    total += std::sqrt(sq / bins.size());
  }
  return total / frames;
}

double rca(const melody::F0Track& ref, const melody::F0Track& est, double tolerance_cents) {
  ref.validate();
  est.validate();
  if (est.size() == 0) throw ValidationError("rca: empty estimate track");

  long long voiced = 0, correct = 0;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    if (!ref.voicing[i]) continue;
    ++voiced;
    const double when = ref.times[i];
    while (cursor + 1 < est.size() &&
           std::abs(est.times[cursor + 1] - when) <= std::abs(est.times[cursor] - when)) {
      ++cursor;
    }
    if (!est.voicing[cursor]) continue;
    const double cents = 1200.0 * std::log2(est.f0_hz[cursor] / ref.f0_hz[i]);
    const double folded = std::fmod(std::abs(cents), 1200.0);
    const double dist = std::min(folded, 1200.0 - folded);
    if (dist <= tolerance_cents) ++correct;
  }
  if (voiced == 0) throw ValidationError("rca: reference has no voiced frames");
  return static_cast<double>(correct) / static_cast<double>(voiced);
}

EvalReport evaluate_model(const std::vector<data::PairedExample>& testset,
                          net::GeneratorF& generator, const EvalConfig& cfg) {
  if (testset.empty()) throw ValidationError("evaluate_model: empty test set");
  const int n_mels = generator.config().n_mels;
  const dsp::MelFilterbank bank = dsp::MelFilterbank::make(
      n_mels, cfg.dsp.fft_size, cfg.dsp.sample_rate, cfg.dsp.fmin, cfg.dsp.effective_fmax());

  EvalReport report;
  report.model_id = cfg.model_id;
  report.config_hash = cfg.config_hash;
  double sum_lsd = 0.0, sum_rca = 0.0;
  for (const auto& ex : testset) {
    EvalReport::Row row;
    row.id = ex.id;
    try {
      const MatF y_hat = generator.generate(ex.speech.values, ex.contour.onehot);
      row.lsd_db = lsd(ex.singing.values.cast<double>(), y_hat.cast<double>(),
                       bank.center_freqs_hz, cfg.band_lo_hz, cfg.band_hi_hz);

      dsp::LogMelSpectrogram mel = ex.singing;
      mel.values = y_hat;
      const dsp::LinearSpectrogram linear = dsp::mel_invert(mel, bank, cfg.dsp.fft_size);
      const Waveform audio = dsp::griffin_lim(linear, cfg.griffin_lim_iterations);
      const melody::F0Track est = melody::estimate_f0(audio, cfg.dsp.hop);
      const melody::F0Track ref = melody::contour_to_f0(ex.contour);
      row.rca = rca(ref, est, cfg.tolerance_cents);

      sum_lsd += row.lsd_db;
      sum_rca += row.rca;
      ++report.n_ok;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
      ++report.n_failed;
    }
    report.rows.push_back(std::move(row));
  }
  if (report.n_ok > 0) {
    report.mean_lsd_db = sum_lsd / report.n_ok;
    report.mean_rca = sum_rca / report.n_ok;
  }
  return report;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write report: " + path);
  out << "example_id,lsd_db,rca\n";
  char buf[256];
  for (const auto& row : report.rows) {
    if (row.ok) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", row.id.c_str(), row.lsd_db, row.rca);
      out << buf;
    } else {
      out << row.id << ",failed,failed\n";
    }
  }
  std::snprintf(buf, sizeof(buf), "mean,%.6f,%.6f\n", report.mean_lsd_db, report.mean_rca);
  out << buf;
}

}  // namespace sts::eval
