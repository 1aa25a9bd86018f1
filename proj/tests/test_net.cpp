#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "sts/net/model.hpp"

using namespace sts;
using namespace sts::net;

namespace {

MatF random_logmel_like(Rng& rng, int rows, int cols, double lo = -6.0, double hi = 2.0) {
  MatF m(rows, cols);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(uniform_real(rng, lo, hi));
  return m;
}

MatF random_contour(Rng& rng, int cols, int note_lo = 40, int note_hi = 90) {
  MatF c = MatF::Zero(128, cols);
  for (int t = 0; t < cols; ++t) c(uniform_int(rng, note_lo, note_hi), t) = 1.0f;
  return c;
}

}  // namespace

TEST_CASE("generator: shape algebra across frame counts") {
  const ModelConfig cfg;
  Generator<float> gen(cfg, 1);
  Rng rng(4);
  for (int frames : {8, 64, 256}) {
    const MatF x = random_logmel_like(rng, 80, frames);
    const MatF c = random_contour(rng, frames);
    const auto enc = gen.encode_content(x);
    CHECK(enc.latent.rows() == 10);
    CHECK(enc.latent.cols() == frames / 8);
    CHECK(enc.skip_half.rows() == 40);
    CHECK(enc.skip_half.cols() == frames / 2);
    CHECK(enc.skip_quarter.rows() == 20);
    CHECK(enc.skip_quarter.cols() == frames / 4);
    const MatF pitch = gen.encode_pitch(c);
    CHECK(pitch.rows() == 16);
    CHECK(pitch.cols() == frames / 8);
    const MatF out = gen.generate(x, c);
    CHECK(out.rows() == 80);
    CHECK(out.cols() == frames);
    CHECK(out.allFinite());
  }
}

TEST_CASE("generator: decode scales fully convolutionally") {
  const ModelConfig cfg;
  Generator<float> gen(cfg, 2);
  Rng rng(5);
  const MatF x256 = random_logmel_like(rng, 80, 256);
  const MatF x512 = random_logmel_like(rng, 80, 512);
  const auto enc256 = gen.encode_content(x256);
  const auto enc512 = gen.encode_content(x512);
  const MatF p256 = gen.encode_pitch(random_contour(rng, 256));
  const MatF p512 = gen.encode_pitch(random_contour(rng, 512));
  CHECK(gen.decode(enc256.latent, p256, enc256.skip_half, enc256.skip_quarter).cols() == 256);
  CHECK(gen.decode(enc512.latent, p512, enc512.skip_half, enc512.skip_quarter).cols() == 512);
  CHECK_THROWS_AS(gen.decode(enc256.latent, p512, enc256.skip_half, enc256.skip_quarter),
                  ValidationError);
}

TEST_CASE("generator: non-multiple-of-8 inputs are padded then cropped") {
  const ModelConfig cfg;
  Generator<float> gen(cfg, 3);
  Rng rng(6);
  const MatF x = random_logmel_like(rng, 80, 13);
  const MatF c = random_contour(rng, 13);
  const MatF out = gen.generate(x, c);
  CHECK(out.rows() == 80);
  CHECK(out.cols() == 13);
}

TEST_CASE("generator: output respects the clamp head range") {
  const ModelConfig cfg;
  Generator<float> gen(cfg, 9);
  Rng rng(10);
  const MatF out = gen.generate(random_logmel_like(rng, 80, 64), random_contour(rng, 64));
  CHECK(out.minCoeff() >= cfg.out_min);
  CHECK(out.maxCoeff() <= cfg.out_max);
}

TEST_CASE("generator: determinism from the seed") {
  const ModelConfig cfg;
  Generator<float> a(cfg, 42), b(cfg, 42), c(cfg, 43);
  auto pa = a.params();
  auto pb = b.params();
  auto pc = c.params();
  REQUIRE(pa.size() == pb.size());
  bool all_equal = true, any_diff_seed = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    all_equal = all_equal && (*pa[i].value == *pb[i].value);
    any_diff_seed = any_diff_seed || (*pa[i].value != *pc[i].value);
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);

  Rng rng(12);
  const MatF x = random_logmel_like(rng, 80, 64);
  const MatF contour = random_contour(rng, 64);
  CHECK(a.generate(x, contour) == b.generate(x, contour));
}

TEST_CASE("instance norm removes a per-channel constant offset") {
  const ModelConfig cfg;
  Generator<float> gen(cfg, 7);
  Rng rng(8);
  const MatF x = random_logmel_like(rng, 80, 64);
  MatF shifted = x;
  shifted.row(33).array() += 5.0f;
  const auto a = gen.encode_content(x);
  const auto b = gen.encode_content(shifted);
  // the offset dies in the first normalization, so the whole encoding matches
  CHECK((a.latent - b.latent).cwiseAbs().maxCoeff() < 1e-4f);
  CHECK((a.skip_half - b.skip_half).cwiseAbs().maxCoeff() < 1e-4f);
}

TEST_CASE("pitch encoder is local: rest padding leaves early latents unchanged") {
  const ModelConfig cfg;
  Generator<float> gen(cfg, 11);
  Rng rng(13);
  const int frames = 32, keep = 24;
  const MatF a = random_contour(rng, frames);
  MatF b = a;
  for (int t = keep; t < frames; ++t) {
    b.col(t).setZero();
    b(0, t) = 1.0f;  // rest
  }
  const MatF la = gen.encode_pitch(a);
  const MatF lb = gen.encode_pitch(b);
  // latent column i sees input frames [8i-7, 8i+7]
  for (int i = 0; 8 * i + 7 < keep; ++i) {
    CHECK(la.col(i) == lb.col(i));
  }
  CHECK(la.col(3) != lb.col(3));
}

TEST_CASE("pitch encoder rejects malformed contours") {
  const ModelConfig cfg;
  Generator<float> gen(cfg, 1);
  MatF bad = MatF::Zero(128, 4);
  bad(3, 0) = 1.0f;
  bad(4, 0) = 1.0f;  // two hot rows
  bad(5, 1) = 1.0f;
  bad(6, 2) = 1.0f;
  bad(7, 3) = 1.0f;
  CHECK_THROWS_AS(gen.encode_pitch(bad), ValidationError);
  MatF fractional = MatF::Zero(128, 1);
  fractional(3, 0) = 0.5f;
  CHECK_THROWS_AS(gen.encode_pitch(fractional), ValidationError);
}

TEST_CASE("encode_content rejects non-finite input") {
  const ModelConfig cfg;
  Generator<float> gen(cfg, 1);
  MatF x = MatF::Zero(80, 8);
  x(0, 0) = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(gen.encode_content(x), ValidationError);
}

TEST_CASE("discriminator: reconstruction shape and loss recomputation") {
  const ModelConfig cfg;
  Discriminator<float> disc(cfg, 21);
  Rng rng(22);
  const MatF y = random_logmel_like(rng, 80, 64);
  const auto res = disc.discriminate(y);
  CHECK(res.reconstruction.rows() == y.rows());
  CHECK(res.reconstruction.cols() == y.cols());
  CHECK(res.loss >= 0.0f);
  const float recomputed = (y - res.reconstruction).cwiseAbs().sum() / y.size();
  CHECK(res.loss == doctest::Approx(recomputed).epsilon(1e-6));
  // perfect reconstruction means zero loss
  CHECK(mean_abs_diff<float>(y, y) == 0.0f);
}

TEST_CASE("mean output depends on every parameter group") {
  const ModelConfig cfg = ModelConfig::reduced();
  Generator<double> gen(cfg, 31);
  const gradcheck::Fixture fix(cfg, 16, 32);
  gen.zero_grads();
  const auto out = gen.generate(fix.x, fix.contour);
  const gradcheck::MatX seed =
      gradcheck::MatX::Constant(out.rows(), out.cols(), 1.0 / out.size());
  gen.backward(seed, true);
  for (const auto& p : gen.params()) {
    INFO("parameter group: ", p.name);
    CHECK(p.grad->cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("gradient check: generator loss on the reduced model") {
  const ModelConfig cfg = ModelConfig::reduced();
  Generator<double> gen(cfg, 101);
  Discriminator<double> disc(cfg, 102);
  const gradcheck::Fixture fix(cfg, 16, 103);
  const double beta = 0.5;

  auto loss = [&]() {
    const auto y_hat = gen.generate(fix.x, fix.contour);
    const auto res = disc.discriminate(y_hat);
    return res.loss + beta * mean_abs_diff<double>(fix.y, y_hat);
  };

  gen.zero_grads();
  const auto y_hat = gen.generate(fix.x, fix.contour);
  disc.discriminate(y_hat);
  gradcheck::MatX grad = disc.loss_backward(1.0, false);
  grad += beta * mean_abs_diff_grad<double>(y_hat, fix.y);
  gen.backward(grad, true);

  const auto result = gradcheck::compare(gen.params(), loss);
  CHECK(result.checked > 1000);
  CHECK(result.max_rel_error < 1e-3);
}

TEST_CASE("gradient check: discriminator loss on the reduced model") {
  const ModelConfig cfg = ModelConfig::reduced();
  Discriminator<double> disc(cfg, 202);
  const gradcheck::Fixture fix(cfg, 16, 203);
  const double k = 0.3;

  auto loss = [&]() {
    const double l_real = disc.discriminate(fix.y).loss;
    const double l_fake = disc.discriminate(fix.x).loss;  // any fixed "fake" works
    return l_real - k * l_fake;
  };

  disc.zero_grads();
  disc.discriminate(fix.y);
  disc.loss_backward(1.0, true);
  disc.discriminate(fix.x);
  disc.loss_backward(-k, true);

  const auto result = gradcheck::compare(disc.params(), loss);
  CHECK(result.checked > 500);
  CHECK(result.max_rel_error < 1e-3);
}

TEST_CASE("gradient isolation between the two networks") {
  const ModelConfig cfg = ModelConfig::reduced();
  Generator<float> gen(cfg, 301);
  Discriminator<float> disc(cfg, 302);
  Rng rng(303);
  const MatF x = random_logmel_like(rng, cfg.n_mels, 16);
  const MatF c = random_contour(rng, 16);

  gen.zero_grads();
  disc.zero_grads();
  const MatF y_hat = gen.generate(x, c);
  disc.discriminate(y_hat);
  const MatF gin = disc.loss_backward(1.0f, false);  // generator-update path
  for (const auto& p : disc.params()) CHECK(p.grad->cwiseAbs().maxCoeff() == 0.0f);
  gen.backward(gin, true);
  for (const auto& p : disc.params()) CHECK(p.grad->cwiseAbs().maxCoeff() == 0.0f);

  gen.zero_grads();
  disc.discriminate(y_hat);  // discriminator-update path
  disc.loss_backward(1.0f, true);
  bool disc_has_grads = false;
  for (const auto& p : disc.params()) {
    disc_has_grads = disc_has_grads || p.grad->cwiseAbs().maxCoeff() > 0.0f;
  }
  CHECK(disc_has_grads);
  for (const auto& p : gen.params()) CHECK(p.grad->cwiseAbs().maxCoeff() == 0.0f);
}
