#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sts/eval.hpp"

using namespace sts;
using namespace sts::eval;

namespace {

std::vector<double> linear_bin_freqs(int bins, int sample_rate, int fft_size) {
  std::vector<double> freqs(bins);
  for (int b = 0; b < bins; ++b) freqs[b] = static_cast<double>(b) * sample_rate / fft_size;
  return freqs;
}

melody::F0Track detuned(const melody::F0Track& ref, double cents) {
  melody::F0Track out = ref;
  const double factor = std::pow(2.0, cents / 1200.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.voicing[i]) out.f0_hz[i] *= factor;
  }
  return out;
}

melody::F0Track tone_track(int frames, double f0) {
  melody::F0Track t;
  for (int i = 0; i < frames; ++i) {
    t.times.push_back(i * 0.0125);
    t.f0_hz.push_back(f0);
    t.voicing.push_back(1);
  }
  return t;
}

}  // namespace

TEST_CASE("lsd: identity, uniform scaling, and the brute-force oracle") {
  Rng rng(3);
  MatD a(4, 4), b(4, 4);
  for (int i = 0; i < a.size(); ++i) {
    a.data()[i] = uniform_real(rng, -8.0, 2.0);
    b.data()[i] = uniform_real(rng, -8.0, 2.0);
  }
  const auto freqs = std::vector<double>{100.0, 500.0, 1000.0, 2000.0};

  CHECK(lsd(a, a, freqs, 0.0, 3000.0) == 0.0);

  // multiplying magnitudes by 10 adds ln(10) in log space: exactly 20 dB
  const MatD scaled = a.array() + std::log(10.0);
  CHECK(std::abs(lsd(a, scaled, freqs, 0.0, 3000.0) - 20.0) < 1e-9);

  // independent direct summation
  double expected = 0.0;
  for (int t = 0; t < 4; ++t) {
    double sq = 0.0;
    for (int f = 0; f < 4; ++f) {
      const double diff = (a(f, t) - b(f, t)) * 20.0 / std::log(10.0);
      sq += diff * diff;
    }
    expected += std::sqrt(sq / 4.0);
  }
  expected /= 4.0;
  CHECK(std::abs(lsd(a, b, freqs, 0.0, 3000.0) - expected) < 1e-9);

  MatD wrong(4, 5);
  CHECK_THROWS_AS(lsd(a, wrong, freqs, 0.0, 3000.0), ValidationError);
  CHECK_THROWS_AS(lsd(a, b, freqs, 50000.0, 60000.0), ValidationError);
}

TEST_CASE("lsd: band restriction drops out-of-band bins") {
  MatD a = MatD::Zero(3, 2);
  MatD b = MatD::Zero(3, 2);
  b.row(0).array() += 1.0;  // 50 Hz bin, outside [100, 3500]
  const std::vector<double> freqs = {50.0, 500.0, 1500.0};
  CHECK(lsd(a, b, freqs, 100.0, 3500.0) == 0.0);
  CHECK(lsd(a, b, freqs, 0.0, 3500.0) > 0.0);
}

TEST_CASE("lsd: symmetry and the scale law") {
  Rng rng(7);
  MatD a(6, 5), b(6, 5);
  for (int i = 0; i < a.size(); ++i) {
    a.data()[i] = uniform_real(rng, -5.0, 3.0);
    b.data()[i] = uniform_real(rng, -5.0, 3.0);
  }
  std::vector<double> freqs = {100, 200, 400, 800, 1600, 3200};
  CHECK(lsd(a, b, freqs, 0, 4000) == doctest::Approx(lsd(b, a, freqs, 0, 4000)).epsilon(1e-12));

  for (double c : {0.5, 2.0, 10.0}) {
    const MatD scaled = a.array() + std::log(c);
    const double expected = std::abs(20.0 * std::log10(c));
    CHECK(lsd(a, scaled, freqs, 0, 4000) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("rca: tolerance boundary and octave folding") {
  const auto ref = tone_track(40, 440.0);
  CHECK(rca(ref, ref) == 1.0);
  CHECK(rca(ref, detuned(ref, 1200.0)) == 1.0);
  CHECK(rca(ref, detuned(ref, 49.0)) == 1.0);
  CHECK(rca(ref, detuned(ref, 51.0)) == 0.0);
  CHECK(rca(ref, detuned(ref, -2400.0)) == 1.0);

  // estimate-unvoiced frames at reference-voiced positions count as wrong
  melody::F0Track est = ref;
  for (int i = 0; i < 20; ++i) {
    est.f0_hz[i] = 0.0;
    est.voicing[i] = 0;
  }
  CHECK(rca(ref, est) == doctest::Approx(0.5));

  melody::F0Track unvoiced_ref = ref;
  for (std::size_t i = 0; i < unvoiced_ref.size(); ++i) {
    unvoiced_ref.f0_hz[i] = 0.0;
    unvoiced_ref.voicing[i] = 0;
  }
  CHECK_THROWS_AS(rca(unvoiced_ref, est), ValidationError);
}

TEST_CASE("rca: monotone under increasing uniform detune") {
  melody::F0Track ref;
  Rng rng(11);
  for (int i = 0; i < 64; ++i) {
    ref.times.push_back(i * 0.0125);
    ref.f0_hz.push_back(uniform_real(rng, 150.0, 600.0));
    ref.voicing.push_back(1);
  }
  double prev = 1.1;
  for (double cents : {0.0, 20.0, 45.0, 55.0, 100.0, 300.0, 600.0}) {
    const double score = rca(ref, detuned(ref, cents));
    CHECK(score <= prev + 1e-12);
    prev = score;
  }
}

TEST_CASE("rca invariance when one track is octave-transposed") {
  const auto ref = tone_track(32, 330.0);
  Rng rng(13);
  melody::F0Track est = ref;
  for (std::size_t i = 0; i < est.size(); ++i) {
    est.f0_hz[i] *= std::pow(2.0, static_cast<double>(uniform_int(rng, -1, 1)));
  }
  CHECK(rca(ref, est) == 1.0);
}

TEST_CASE("evaluate_model: reports one row per example and is deterministic") {
  data::SyntheticParams params;
  params.n_mels = 16;
  params.n_notes = 2;
  params.frames_per_note = 24;
  std::vector<data::PairedExample> testset;
  Rng rng(17);
  for (int i = 0; i < 3; ++i) {
    auto ex = data::make_synthetic_pair(rng, params);
    ex.id = "ex" + std::to_string(i);
    testset.push_back(std::move(ex));
  }

  net::ModelConfig model_cfg;
  model_cfg.n_mels = 16;
  model_cfg.pitch_embed = 8;
  model_cfg.decoder_width = 8;
  net::GeneratorF gen(model_cfg, 5);

  EvalConfig cfg;
  cfg.dsp.n_mels = 16;
  cfg.griffin_lim_iterations = 4;  // keep the test quick
  const EvalReport report = evaluate_model(testset, gen, cfg);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.n_ok == 3);
  CHECK(report.mean_lsd_db > 0.0);

  const EvalReport again = evaluate_model(testset, gen, cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(report.rows[i].lsd_db == again.rows[i].lsd_db);
    CHECK(report.rows[i].rca == again.rows[i].rca);
  }

  const std::string csv = std::filesystem::temp_directory_path() / "sts_eval_report.csv";
  write_report_csv(report, csv);
  std::ifstream in(csv);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 5);  // header + 3 rows + mean
  std::filesystem::remove(csv);

  CHECK_THROWS_AS(evaluate_model({}, gen, cfg), ValidationError);
}
