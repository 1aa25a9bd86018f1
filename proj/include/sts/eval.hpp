#ifndef STS_EVAL_HPP
#define STS_EVAL_HPP

#include <string>
#include <vector>

#include "sts/data.hpp"
#include "sts/net/model.hpp"

namespace sts::eval {

/// Log-spectral distance in dB between two same-shape natural-log spectra.
/// Bins whose center frequency lies in [f_lo, f_hi] contribute; the distance
/// is the per-frame RMS of the dB difference averaged over frames.
double lsd(const MatD& y_true, const MatD& y_pred, const std::vector<double>& bin_freqs_hz,
           double f_lo, double f_hi);

/// Raw chroma accuracy: the fraction of reference-voiced frames where the
/// estimate is voiced and within tolerance_cents after octave folding.
/// Estimate frames are matched to reference times by nearest neighbor.
double rca(const melody::F0Track& ref, const melody::F0Track& est,
           double tolerance_cents = 50.0);

struct EvalConfig {
  dsp::DspConfig dsp;
  double band_lo_hz = 100.0;
  double band_hi_hz = 3500.0;
  int griffin_lim_iterations = 60;
  double tolerance_cents = 50.0;
  std::string model_id;
  std::string config_hash;
};

struct EvalReport {
  struct Row {
    std::string id;
    double lsd_db = 0.0;
    double rca = 0.0;
    bool ok = true;
    std::string error;
  };
  std::vector<Row> rows;
  double mean_lsd_db = 0.0;
  double mean_rca = 0.0;
  int n_ok = 0;
  int n_failed = 0;
  std::string model_id;
  std::string config_hash;
};

/// Converts every example, scores LSD against the target mel and RCA of the
/// pitch track recovered from the Griffin-Lim inversion against the target
/// contour. Per-example failures are recorded and excluded from the means.
EvalReport evaluate_model(const std::vector<data::PairedExample>& testset,
                          net::GeneratorF& generator, const EvalConfig& cfg);

/// CSV: "example_id,lsd_db,rca" rows, then a "mean,..." summary line.
void write_report_csv(const EvalReport& report, const std::string& path);

}  // namespace sts::eval

#endif  // STS_EVAL_HPP
