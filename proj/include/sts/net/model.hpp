#ifndef STS_NET_MODEL_HPP
#define STS_NET_MODEL_HPP

#include <array>
#include <map>
#include <string>
#include <vector>

#include "sts/net/layers.hpp"

namespace sts::net {

/// Architecture hyperparameters. The content encoder treats mel bins as
/// channels and halves them per stride-2 stack (n_mels -> /2 -> /4 -> /8),
/// so time and frequency both shrink by 8. The pitch branch embeds the 128
/// MIDI rows and runs matching stride-2 convolutions with output widths
/// (E, E/2, E/4). The decoder keeps a fixed internal conv width; each stack
/// doubles time (nearest-neighbor) and doubles channels by concatenating a
/// convolved copy, with content-encoder skips concatenated at the matching
/// resolutions and a final 1x1 head back to n_mels.
struct ModelConfig {
  int n_mels = 80;
  int pitch_embed = 64;
  int decoder_width = 32;
  int gn_groups = 4;
  float leaky_slope = 0.2f;
  float norm_eps = 1e-5f;
  float pad_value = -11.512925f;  // log(1e-5), used when padding to a multiple of 8
  float out_min = -13.512925f;    // clamp head bounds
  float out_max = 5.0f;

  int content_ch(int stage) const { return n_mels >> stage; }  // stage 0..3
  int pitch_ch(int stage) const {                              // stage 0..3
    return stage <= 1 ? pitch_embed : pitch_embed >> (stage - 1);
  }
  int latent_ch() const { return content_ch(3) + pitch_ch(3); }

  void validate() const {
    if (n_mels < 8 || n_mels % 8 != 0) {
      throw std::invalid_argument("ModelConfig: n_mels must be a positive multiple of 8");
    }
    if (pitch_embed < 4 || pitch_embed % 4 != 0) {
      throw std::invalid_argument("ModelConfig: pitch_embed must be a positive multiple of 4");
    }
    if (decoder_width < 1 || decoder_width % gn_groups != 0) {
      throw std::invalid_argument("ModelConfig: gn_groups must divide decoder_width");
    }
  }

  /// Desk-scale variant (all widths / 8) used by gradient checks.
  static ModelConfig reduced() {
    ModelConfig cfg;
    cfg.n_mels = 8;
    cfg.pitch_embed = 8;
    cfg.decoder_width = 4;
    return cfg;
  }

  std::map<std::string, std::string> fields() const {
    return {
        {"n_mels", std::to_string(n_mels)},
        {"pitch_embed", std::to_string(pitch_embed)},
        {"decoder_width", std::to_string(decoder_width)},
        {"gn_groups", std::to_string(gn_groups)},
    };
  }
};

/// Content/pitch encoders plus the progressively-growing decoder.
template <class S>
class Generator {
 public:
  struct ContentEncoding {
    Mat<S> latent;         // n_mels/8 x T/8
    Mat<S> skip_half;      // n_mels/2 x T/2
    Mat<S> skip_quarter;   // n_mels/4 x T/4
  };

  Generator(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    for (int i = 0; i < 3; ++i) {
      content_norm_[i].init(cfg_.content_ch(i), static_cast<S>(cfg_.norm_eps));
      content_conv_[i].init(cfg_.content_ch(i), cfg_.content_ch(i + 1), 3, 2, 1, rng);
      content_act_[i].slope = static_cast<S>(cfg_.leaky_slope);
    }
    embed_.init(cfg_.pitch_embed, rng);
    for (int i = 0; i < 3; ++i) {
      pitch_conv_[i].init(cfg_.pitch_ch(i), cfg_.pitch_ch(i + 1), 3, 2, 1, rng);
      pitch_act_[i].slope = static_cast<S>(cfg_.leaky_slope);
    }
    const int w = cfg_.decoder_width;
    const std::array<int, 3> stack_in = {cfg_.latent_ch(), 2 * w + cfg_.content_ch(2),
                                         2 * w + cfg_.content_ch(1)};
    for (int i = 0; i < 3; ++i) {
      dec_conv_a_[i].init(stack_in[i], w, 3, 1, 1, rng);
      dec_conv_b_[i].init(w, w, 3, 1, 1, rng);
      dec_norm_[i].init(w, cfg_.gn_groups, static_cast<S>(cfg_.norm_eps));
      dec_up_conv_[i].init(w, w, 3, 1, 1, rng);
      dec_act_a_[i].slope = static_cast<S>(cfg_.leaky_slope);
      dec_act_b_[i].slope = static_cast<S>(cfg_.leaky_slope);
    }
    head_.init(2 * w, cfg_.n_mels, 1, 1, 0, rng);
    head_.b.setConstant(static_cast<S>(cfg_.pad_value));  // start at the log floor
    clamp_.lo = static_cast<S>(cfg_.out_min);
    clamp_.hi = static_cast<S>(cfg_.out_max);
  }

  const ModelConfig& config() const { return cfg_; }

  ContentEncoding encode_content(const Mat<S>& x) {
    if (x.rows() != cfg_.n_mels) {
      throw ValidationError("encode_content: expected " + std::to_string(cfg_.n_mels) +
                            " mel rows, got " + std::to_string(x.rows()));
    }
    if (!x.allFinite()) throw ValidationError("encode_content: non-finite input");
    ContentEncoding enc;
    Mat<S> h = x;
    for (int i = 0; i < 3; ++i) {
      h = content_act_[i].forward(content_conv_[i].forward(content_norm_[i].forward(h)));
      if (i == 0) enc.skip_half = h;
      if (i == 1) enc.skip_quarter = h;
    }
    enc.latent = h;
    return enc;
  }

  Mat<S> encode_pitch(const Mat<S>& onehot) {
    Mat<S> h = embed_.forward(onehot_to_notes(onehot));
    for (int i = 0; i < 3; ++i) {
      h = pitch_act_[i].forward(pitch_conv_[i].forward(h));
    }
    return h;
  }

  Mat<S> decode(const Mat<S>& content, const Mat<S>& pitch, const Mat<S>& skip_half,
                const Mat<S>& skip_quarter) {
    if (content.cols() != pitch.cols()) {
      throw ValidationError("decode: content/pitch latent lengths differ (" +
                            std::to_string(content.cols()) + " vs " +
                            std::to_string(pitch.cols()) + ")");
    }
    Mat<S> h(content.rows() + pitch.rows(), content.cols());
    h.topRows(content.rows()) = content;
    h.bottomRows(pitch.rows()) = pitch;
    for (int i = 0; i < 3; ++i) {
      h = dec_act_a_[i].forward(dec_conv_a_[i].forward(h));
      h = dec_act_b_[i].forward(dec_norm_[i].forward(dec_conv_b_[i].forward(h)));
      h = upsample_time2(h);
      Mat<S> grown(2 * h.rows(), h.cols());
      grown.topRows(h.rows()) = h;
      grown.bottomRows(h.rows()) = dec_up_conv_[i].forward(h);
      h = std::move(grown);
      const Mat<S>* skip = i == 0 ? &skip_quarter : (i == 1 ? &skip_half : nullptr);
      if (skip != nullptr) {
        if (skip->cols() != h.cols()) {
          throw ValidationError("decode: skip feature length mismatch at stack " +
                                std::to_string(i));
        }
        Mat<S> with_skip(h.rows() + skip->rows(), h.cols());
        with_skip.topRows(h.rows()) = h;
        with_skip.bottomRows(skip->rows()) = *skip;
        h = std::move(with_skip);
      }
    }
    return clamp_.forward(head_.forward(h));
  }

  /// Full conversion: pads inputs to a multiple of 8 frames when needed and
  /// crops the output back. Backward() differentiates the latest call.
  Mat<S> generate(const Mat<S>& x, const Mat<S>& onehot) {
    if (onehot.rows() != 128) throw ValidationError("generate: contour must have 128 rows");
    if (x.cols() != onehot.cols()) {
      throw ValidationError("generate: input and contour frame counts differ");
    }
    orig_frames_ = static_cast<int>(x.cols());
    const int padded = (orig_frames_ + 7) / 8 * 8;
    Mat<S> xp = x;
    Mat<S> cp = onehot;
    if (padded != orig_frames_) {
      xp.conservativeResize(Eigen::NoChange, padded);
      cp.conservativeResize(Eigen::NoChange, padded);
      for (int t = orig_frames_; t < padded; ++t) {
        xp.col(t).setConstant(static_cast<S>(cfg_.pad_value));
        cp.col(t).setZero();
        cp(0, t) = S(1);  // rest
      }
    }
    padded_frames_ = padded;
    content_cache_ = encode_content(xp);
    pitch_cache_ = encode_pitch(cp);
    Mat<S> out = decode(content_cache_.latent, pitch_cache_, content_cache_.skip_half,
                        content_cache_.skip_quarter);
    if (padded != orig_frames_) out = out.leftCols(orig_frames_).eval();
    return out;
  }

  /// Gradient of the latest generate() output; returns d/d(input mel).
  Mat<S> backward(const Mat<S>& grad_out, bool accumulate = true) {
    Mat<S> g = grad_out;
    if (padded_frames_ != orig_frames_) {
      g.conservativeResize(Eigen::NoChange, padded_frames_);
      g.rightCols(padded_frames_ - orig_frames_).setZero();
    }
    g = head_.backward(clamp_.backward(g), accumulate);

    Mat<S> g_skip_half, g_skip_quarter;
    for (int i = 2; i >= 0; --i) {
      if (i == 1) {
        g_skip_half = g.bottomRows(cfg_.content_ch(1));
        g = g.topRows(g.rows() - cfg_.content_ch(1)).eval();
      } else if (i == 0) {
        g_skip_quarter = g.bottomRows(cfg_.content_ch(2));
        g = g.topRows(g.rows() - cfg_.content_ch(2)).eval();
      }
      const int half = static_cast<int>(g.rows()) / 2;
      Mat<S> gu = g.topRows(half) + dec_up_conv_[i].backward(g.bottomRows(half), accumulate);
      g = upsample_time2_backward(gu);
      g = dec_conv_b_[i].backward(dec_norm_[i].backward(dec_act_b_[i].backward(g), accumulate),
                                  accumulate);
      g = dec_conv_a_[i].backward(dec_act_a_[i].backward(g), accumulate);
    }

    Mat<S> g_content = g.topRows(cfg_.content_ch(3));
    Mat<S> g_pitch = g.bottomRows(cfg_.pitch_ch(3));
    for (int i = 2; i >= 0; --i) {
      g_pitch = pitch_conv_[i].backward(pitch_act_[i].backward(g_pitch), accumulate);
    }
    embed_.backward(g_pitch, accumulate);

    for (int i = 2; i >= 0; --i) {
      if (i == 0) g_content += g_skip_half;
      if (i == 1) g_content += g_skip_quarter;
      g_content = content_norm_[i].backward(
          content_conv_[i].backward(content_act_[i].backward(g_content), accumulate),
          accumulate);
    }
    if (padded_frames_ != orig_frames_) g_content = g_content.leftCols(orig_frames_).eval();
    return g_content;
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    for (int i = 0; i < 3; ++i) {
      const std::string n = "content" + std::to_string(i);
      content_norm_[i].collect(n + ".norm", out);
      content_conv_[i].collect(n + ".conv", out);
    }
    embed_.collect("pitch.embed", out);
    for (int i = 0; i < 3; ++i) {
      pitch_conv_[i].collect("pitch" + std::to_string(i) + ".conv", out);
    }
    for (int i = 0; i < 3; ++i) {
      const std::string n = "dec" + std::to_string(i);
      dec_conv_a_[i].collect(n + ".conv_a", out);
      dec_conv_b_[i].collect(n + ".conv_b", out);
      dec_norm_[i].collect(n + ".norm", out);
      dec_up_conv_[i].collect(n + ".up_conv", out);
    }
    head_.collect("head", out);
    return out;
  }

  void zero_grads() {
    for (auto& p : params()) p.grad->setZero();
  }

  static std::vector<int> onehot_to_notes(const Mat<S>& onehot) {
    if (onehot.rows() != 128) throw ValidationError("melody contour must have 128 rows");
    std::vector<int> notes(onehot.cols());
    for (int t = 0; t < onehot.cols(); ++t) {
      int hit = -1;
      S sum = S(0);
      for (int r = 0; r < 128; ++r) {
        const S v = onehot(r, t);
        if (v != S(0) && v != S(1)) {
          throw ValidationError("melody contour entries must be 0 or 1 (column " +
                                std::to_string(t) + ")");
        }
        sum += v;
        if (v == S(1)) hit = r;
      }
      if (sum != S(1)) {
        throw ValidationError("melody contour column " + std::to_string(t) +
                              " is not one-hot");
      }
      notes[t] = hit;
    }
    return notes;
  }

 private:
  ModelConfig cfg_;
  std::array<InstanceNorm<S>, 3> content_norm_;
  std::array<Conv1d<S>, 3> content_conv_;
  std::array<LeakyReLU<S>, 3> content_act_;
  Embedding<S> embed_;
  std::array<Conv1d<S>, 3> pitch_conv_;
  std::array<LeakyReLU<S>, 3> pitch_act_;
  std::array<Conv1d<S>, 3> dec_conv_a_, dec_conv_b_, dec_up_conv_;
  std::array<GroupNorm<S>, 3> dec_norm_;
  std::array<LeakyReLU<S>, 3> dec_act_a_, dec_act_b_;
  Conv1d<S> head_;
  Clamp<S> clamp_;

  ContentEncoding content_cache_;
  Mat<S> pitch_cache_;
  int orig_frames_ = 0, padded_frames_ = 0;
};

/// Autoencoder over log-mel input; its reconstruction error is the
/// adversarial energy.
template <class S>
class Discriminator {
 public:
  struct Result {
    Mat<S> reconstruction;
    S loss;
  };

  Discriminator(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    for (int i = 0; i < 3; ++i) {
      enc_conv_[i].init(cfg_.content_ch(i), cfg_.content_ch(i + 1), 3, 2, 1, rng);
      enc_act_[i].slope = static_cast<S>(cfg_.leaky_slope);
      dec_conv_[i].init(cfg_.content_ch(3 - i), cfg_.content_ch(2 - i), 3, 1, 1, rng);
      dec_act_[i].slope = static_cast<S>(cfg_.leaky_slope);
    }
    head_.init(cfg_.n_mels, cfg_.n_mels, 1, 1, 0, rng);
    head_.b.setConstant(static_cast<S>(cfg_.pad_value));
  }

  Mat<S> forward(const Mat<S>& y) {
    if (y.rows() != cfg_.n_mels) throw ValidationError("discriminator: wrong mel row count");
    if (!y.allFinite()) throw ValidationError("discriminator: non-finite input");
    orig_frames_ = static_cast<int>(y.cols());
    const int padded = (orig_frames_ + 7) / 8 * 8;
    Mat<S> h = y;
    if (padded != orig_frames_) {
      h.conservativeResize(Eigen::NoChange, padded);
      for (int t = orig_frames_; t < padded; ++t) h.col(t).setConstant(static_cast<S>(cfg_.pad_value));
    }
    padded_frames_ = padded;
    input_ = h;
    for (int i = 0; i < 3; ++i) h = enc_act_[i].forward(enc_conv_[i].forward(h));
    for (int i = 0; i < 3; ++i) {
      h = dec_act_[i].forward(dec_conv_[i].forward(upsample_time2(h)));
    }
    recon_ = head_.forward(h);
    return recon_.leftCols(orig_frames_);
  }

  /// Reconstruction plus its mean-absolute autoencoder loss.
  Result discriminate(const Mat<S>& y) {
    Result res;
    res.reconstruction = forward(y);
    res.loss = mean_abs_diff<S>(res.reconstruction, y.leftCols(orig_frames_));
    return res;
  }

  /// Backpropagates scale * d(loss)/d(...) for the latest forward; returns
  /// the gradient with respect to the network input. With accumulate=false
  /// the parameter gradients stay untouched (used for generator updates).
  Mat<S> loss_backward(S scale, bool accumulate) {
    const Mat<S> in_view = input_.leftCols(orig_frames_);
    const Mat<S> rec_view = recon_.leftCols(orig_frames_);
    Mat<S> g_rec = mean_abs_diff_grad<S>(rec_view, in_view) * scale;
    if (padded_frames_ != orig_frames_) {
      g_rec.conservativeResize(Eigen::NoChange, padded_frames_);
      g_rec.rightCols(padded_frames_ - orig_frames_).setZero();
    }
    Mat<S> g = head_.backward(g_rec, accumulate);
    for (int i = 2; i >= 0; --i) {
      g = upsample_time2_backward(
          Mat<S>(dec_conv_[i].backward(dec_act_[i].backward(g), accumulate)));
    }
    for (int i = 2; i >= 0; --i) {
      g = enc_conv_[i].backward(enc_act_[i].backward(g), accumulate);
    }
    // direct dependence of mean|y - recon| on y
    Mat<S> direct = mean_abs_diff_grad<S>(in_view, rec_view) * scale;
    if (padded_frames_ != orig_frames_) {
      direct.conservativeResize(Eigen::NoChange, padded_frames_);
      direct.rightCols(padded_frames_ - orig_frames_).setZero();
    }
    g += direct;
    return g.leftCols(orig_frames_).eval();
  }

  std::vector<ParamRef<S>> params() {
    std::vector<ParamRef<S>> out;
    for (int i = 0; i < 3; ++i) {
      enc_conv_[i].collect("enc" + std::to_string(i) + ".conv", out);
    }
    for (int i = 0; i < 3; ++i) {
      dec_conv_[i].collect("dec" + std::to_string(i) + ".conv", out);
    }
    head_.collect("head", out);
    return out;
  }

  void zero_grads() {
    for (auto& p : params()) p.grad->setZero();
  }

  const ModelConfig& config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  std::array<Conv1d<S>, 3> enc_conv_, dec_conv_;
  std::array<LeakyReLU<S>, 3> enc_act_, dec_act_;
  Conv1d<S> head_;
  Mat<S> input_, recon_;
  int orig_frames_ = 0, padded_frames_ = 0;
};

using GeneratorF = Generator<float>;
using DiscriminatorF = Discriminator<float>;

}  // namespace sts::net

#endif  // STS_NET_MODEL_HPP
