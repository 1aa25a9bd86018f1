#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sts/config.hpp"
#include "sts/train.hpp"

using namespace sts;
using namespace sts::train;

namespace {

net::ModelConfig tiny_model() {
  net::ModelConfig cfg;
  cfg.n_mels = 16;
  cfg.pitch_embed = 8;
  cfg.decoder_width = 8;
  return cfg;
}

data::SyntheticParams tiny_data() {
  data::SyntheticParams p;
  p.n_mels = 16;
  p.n_notes = 4;
  p.frames_per_note = 16;
  return p;
}

std::vector<data::PairedExample> make_examples(int count, std::uint64_t seed,
                                               const data::SyntheticParams& params) {
  std::vector<data::PairedExample> out;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    auto ex = data::make_synthetic_pair(rng, params);
    ex.id = "toy" + std::to_string(i);
    out.push_back(std::move(ex));
  }
  return out;
}

TrainConfig tiny_train(long long steps, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.batch_size = 2;
  cfg.segment_frames = 32;
  cfg.seed = seed;
  cfg.checkpoint_interval = 1000;
  return cfg;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("sts_train_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace

TEST_CASE("loss_discriminator arithmetic and validation") {
  CHECK(loss_discriminator(1.0, 0.5, 0.2) == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(loss_discriminator(1.0, 123.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(loss_discriminator(0.7, 0.7, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(loss_discriminator(-0.1, 0.5, 0.2), ValidationError);
  CHECK_THROWS_AS(loss_discriminator(0.1, -0.5, 0.2), ValidationError);
}

TEST_CASE("loss_generator: paired, unpaired, and zero-L1 cases") {
  MatF y = MatF::Zero(4, 4);
  MatF y_hat = MatF::Constant(4, 4, 0.4f);
  CHECK(loss_generator(0.5, &y, y_hat, 0.5) == doctest::Approx(0.7).epsilon(1e-6));
  CHECK(loss_generator(0.5, nullptr, y_hat, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(loss_generator(0.3, &y_hat, y_hat, 7.0) == doctest::Approx(0.3).epsilon(1e-12));
  MatF wrong = MatF::Zero(4, 5);
  CHECK_THROWS_AS(loss_generator(0.5, &wrong, y_hat, 0.5), ValidationError);
}

TEST_CASE("update_k: arithmetic and clamping") {
  BEGANState s;
  s.k = 0.0;
  s.gamma = 0.0;
  s.lambda = 0.01;
  const auto a = update_k(s, 1.0, 0.5);  // raw -0.005 clamps to 0
  CHECK(a.k == 0.0);
  CHECK(a.step == 1);

  s.k = 0.5;
  s.gamma = 0.5;
  const auto b = update_k(s, 1.0, 0.2);
  CHECK(b.k == doctest::Approx(0.503).epsilon(1e-12));

  s.k = 1.0;
  s.gamma = 1.0;
  const auto c = update_k(s, 5.0, 0.0);
  CHECK(c.k == 1.0);

  CHECK_THROWS_AS(update_k(s, -1.0, 0.0), ValidationError);
}

TEST_CASE("update_k keeps k in [0,1] for adversarial sequences") {
  BEGANState s;
  s.gamma = 1.0;
  s.lambda = 0.9;
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double l_real = i % 3 == 0 ? 1e6 : uniform_real(rng, 0.0, 10.0);
    const double l_fake = i % 5 == 0 ? 1e6 : uniform_real(rng, 0.0, 10.0);
    s = update_k(s, l_real, l_fake);
    CHECK(s.k >= 0.0);
    CHECK(s.k <= 1.0);
  }
}

TEST_CASE("diversity ratio estimates") {
  LossHistory h;
  CHECK_THROWS_AS(h.diversity_ratio(), ValidationError);
  h.push(1.0, 0.2);
  h.push(1.0, 0.4);
  CHECK(h.diversity_ratio() == doctest::Approx(0.3).epsilon(1e-12));

  LossHistory equal;
  for (int i = 0; i < 5; ++i) equal.push(0.7, 0.7);
  CHECK(equal.diversity_ratio() == doctest::Approx(1.0).epsilon(1e-12));

  LossHistory zero_fake;
  zero_fake.push(0.5, 0.0);
  CHECK(zero_fake.diversity_ratio() == 0.0);

  LossHistory zero_real;
  zero_real.push(0.0, 0.0);
  CHECK_THROWS_AS(zero_real.diversity_ratio(), ValidationError);
}

TEST_CASE("train_step: gamma=0 keeps k at zero; unpaired L_G equals L_fake") {
  const auto examples = make_examples(2, 77, tiny_data());
  auto cfg = tiny_train(10, 7);
  Trainer trainer(tiny_model(), cfg);

  Batch paired;
  paired.paired = true;
  for (const auto& ex : examples) {
    paired.items.push_back({ex.speech.values.leftCols(32), ex.contour.onehot.leftCols(32),
                            ex.singing.values.leftCols(32), ex.id});
  }
  for (int i = 0; i < 5; ++i) {
    const auto metrics = trainer.step(paired);
    CHECK(metrics.k == 0.0);
    CHECK(metrics.l_real >= 0.0);
    CHECK(std::isfinite(metrics.l_g));
  }

  Batch unpaired = paired;
  unpaired.paired = false;
  const auto metrics = trainer.step(unpaired);
  CHECK(metrics.l_g == metrics.l_fake);
}

TEST_CASE("train_loop: paired-only schedule, row counts, lr decay") {
  const auto examples = make_examples(2, 31, tiny_data());
  auto cfg = tiny_train(10, 3);
  const std::string dir = temp_dir("loop");
  const auto result = train_loop(tiny_model(), cfg, examples, {}, dir);
  CHECK(result.last_step == 10);
  CHECK(std::filesystem::exists(result.final_checkpoint));

  const auto lines = read_lines(result.metrics_csv);
  REQUIRE(lines.size() == 11);  // header + 10 rows
  CHECK(lines[0] == std::string(StepMetrics::csv_header()));

  Trainer t(tiny_model(), cfg);
  CHECK(t.lr_for_step(1) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(t.lr_for_step(100) == doctest::Approx(0.001).epsilon(1e-12));
  CHECK(t.lr_for_step(101) == doctest::Approx(0.00099).epsilon(1e-12));
  std::filesystem::remove_all(dir);
}

TEST_CASE("train_loop: seeded runs are identical") {
  const auto examples = make_examples(3, 41, tiny_data());
  const std::string dir_a = temp_dir("det_a");
  const std::string dir_b = temp_dir("det_b");
  auto cfg = tiny_train(8, 1234);
  train_loop(tiny_model(), cfg, examples, {examples[0]}, dir_a);
  train_loop(tiny_model(), cfg, examples, {examples[0]}, dir_b);
  CHECK(read_lines(dir_a + "/metrics.csv") == read_lines(dir_b + "/metrics.csv"));
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("train_loop: resume reproduces the uninterrupted run") {
  const auto examples = make_examples(2, 51, tiny_data());
  const std::string dir_full = temp_dir("resume_full");
  const std::string dir_part = temp_dir("resume_part");

  auto cfg = tiny_train(10, 99);
  train_loop(tiny_model(), cfg, examples, {}, dir_full);

  auto first_half = cfg;
  first_half.steps = 5;
  const auto part = train_loop(tiny_model(), first_half, examples, {}, dir_part);
  const auto resumed = train_loop(tiny_model(), cfg, examples, {}, dir_part,
                                  part.final_checkpoint);
  CHECK(resumed.last_step == 10);

  const auto full_rows = read_lines(dir_full + "/metrics.csv");
  const auto part_rows = read_lines(dir_part + "/metrics.csv");
  REQUIRE(full_rows.size() == part_rows.size());
  CHECK(full_rows == part_rows);
  std::filesystem::remove_all(dir_full);
  std::filesystem::remove_all(dir_part);
}

TEST_CASE("train_loop: empty paired data is a configuration error") {
  auto cfg = tiny_train(5, 1);
  CHECK_THROWS_AS(train_loop(tiny_model(), cfg, {}, {}, temp_dir("empty")), ConfigError);
}

TEST_CASE("trainer checkpoints restore bit-exactly and reject config drift") {
  const auto examples = make_examples(2, 61, tiny_data());
  auto cfg = tiny_train(4, 17);
  Trainer a(tiny_model(), cfg);
  Batch batch;
  for (const auto& ex : examples) {
    batch.items.push_back({ex.speech.values.leftCols(32), ex.contour.onehot.leftCols(32),
                           ex.singing.values.leftCols(32), ex.id});
  }
  for (int i = 0; i < 3; ++i) a.step(batch);

  const std::string path = temp_dir("ckpt") + "/state.stsc";
  a.save(path, "rngstate");

  Trainer b(tiny_model(), cfg);
  CHECK(b.restore(path) == "rngstate");
  auto pa = a.generator().params();
  auto pb = b.generator().params();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pb[i].value);
  CHECK(b.state().step == 3);

  // continuing from the restore matches continuing the original
  const auto ma = a.step(batch);
  const auto mb = b.step(batch);
  CHECK(ma.csv_row() == mb.csv_row());

  // a second save round-trips to identical bytes
  const std::string path2 = std::filesystem::path(path).parent_path() / "state2.stsc";
  b.save(path2, "rngstate");
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  net::ModelConfig other = tiny_model();
  other.decoder_width = 16;
  Trainer c(other, cfg);
  try {
    c.restore(path);
    FAIL("expected mismatch error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("decoder_width") != std::string::npos);
  }
  std::filesystem::remove_all(std::filesystem::path(path).parent_path());
}

TEST_CASE("config files: parsing, overrides, and unknown keys") {
  const std::string text =
      "# run settings\n"
      "steps = 50\n"
      "batch_size = 4\n"
      "lr = 0.001\n"
      "gamma = 0\n"
      "seed = 9\n"
      "segment_frames = 64\n"
      "data_dir = /tmp/feats\n";
  const RunConfig cfg = parse_config_text(text, "inline");
  CHECK(cfg.train.steps == 50);
  CHECK(cfg.train.batch_size == 4);
  CHECK(cfg.train.segment_frames == 64);
  CHECK(cfg.data_dir == "/tmp/feats");

  try {
    parse_config_text("stepz = 50\n", "inline");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("stepz") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("segment_frames = 63\n", "inline"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("lr = fast\n", "inline"), ConfigError);

  CHECK(config_hash_hex(cfg).size() == 16);
  const RunConfig again = parse_config_text(canonical_config(cfg), "roundtrip");
  CHECK(canonical_config(again) == canonical_config(cfg));
}
