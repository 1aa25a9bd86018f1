#ifndef STS_NET_LAYERS_HPP
#define STS_NET_LAYERS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "sts/common.hpp"

// Hand-written differentiable layers over (channels x time) matrices.
// Each layer caches what its backward pass needs from the most recent
// forward; backward must therefore follow the matching forward. Parameter
// gradients accumulate until zero_grads(); pass accumulate=false to
// propagate input gradients without touching parameter gradients.

namespace sts::net {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
struct ParamRef {
  std::string name;
  Mat<S>* value;
  Mat<S>* grad;
};

template <class S>
struct Conv1d {
  int in_ch = 0, out_ch = 0, kernel = 3, stride = 1, pad = 1;
  Mat<S> w;  // out_ch x (in_ch * kernel)
  Mat<S> b;  // out_ch x 1
  Mat<S> gw, gb;
  Mat<S> cols;  // im2col cache
  int in_len = 0;

  void init(int in_c, int out_c, int k, int s, int p, Rng& rng) {
    in_ch = in_c;
    out_ch = out_c;
    kernel = k;
    stride = s;
    pad = p;
    w.resize(out_ch, in_ch * kernel);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * kernel);
    for (int i = 0; i < w.rows(); ++i) {
      for (int j = 0; j < w.cols(); ++j) {
        w(i, j) = static_cast<S>(uniform_real(rng, -bound, bound));
      }
    }
    b = Mat<S>::Zero(out_ch, 1);
    gw = Mat<S>::Zero(w.rows(), w.cols());
    gb = Mat<S>::Zero(out_ch, 1);
  }

  int out_len(int t_in) const { return (t_in + 2 * pad - kernel) / stride + 1; }

  Mat<S> forward(const Mat<S>& x) {
    in_len = static_cast<int>(x.cols());
    const int t_out = out_len(in_len);
    cols.resize(in_ch * kernel, t_out);
    for (int t = 0; t < t_out; ++t) {
      for (int j = 0; j < kernel; ++j) {
        const int src = t * stride - pad + j;
        if (src >= 0 && src < in_len) {
          cols.block(j * in_ch, t, in_ch, 1) = x.col(src);
        } else {
          cols.block(j * in_ch, t, in_ch, 1).setZero();
        }
      }
    }
    Mat<S> out = w * cols;
    out.colwise() += b.col(0);
    return out;
  }

  Mat<S> backward(const Mat<S>& gout, bool accumulate) {
    if (accumulate) {
      gw.noalias() += gout * cols.transpose();
      gb.col(0) += gout.rowwise().sum();
    }
    const Mat<S> dcols = w.transpose() * gout;
    Mat<S> dx = Mat<S>::Zero(in_ch, in_len);
    for (int t = 0; t < gout.cols(); ++t) {
      for (int j = 0; j < kernel; ++j) {
        const int src = t * stride - pad + j;
        if (src >= 0 && src < in_len) dx.col(src) += dcols.block(j * in_ch, t, in_ch, 1);
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", &w, &gw});
    out.push_back({prefix + ".b", &b, &gb});
  }
};

/// Per-channel normalization over time, with learnable affine.
template <class S>
struct InstanceNorm {
  int channels = 0;
  S eps = static_cast<S>(1e-5);
  Mat<S> gamma, beta, ggamma, gbeta;  // channels x 1
  Mat<S> xhat;                        // cache
  Mat<S> inv_std;                     // channels x 1 cache

  void init(int c, S e) {
    channels = c;
    eps = e;
    gamma = Mat<S>::Ones(c, 1);
    beta = Mat<S>::Zero(c, 1);
    ggamma = Mat<S>::Zero(c, 1);
    gbeta = Mat<S>::Zero(c, 1);
  }

  Mat<S> forward(const Mat<S>& x) {
    const int t = static_cast<int>(x.cols());
    xhat.resize(channels, t);
    inv_std.resize(channels, 1);
    Mat<S> out(channels, t);
    for (int c = 0; c < channels; ++c) {
      const S mu = x.row(c).mean();
      const S var = (x.row(c).array() - mu).square().sum() / t;
      const S inv = S(1) / std::sqrt(var + eps);
      inv_std(c, 0) = inv;
      xhat.row(c) = ((x.row(c).array() - mu) * inv).matrix();
      out.row(c) = (gamma(c, 0) * xhat.row(c).array() + beta(c, 0)).matrix();
    }
    return out;
  }

  Mat<S> backward(const Mat<S>& g, bool accumulate) {
    Mat<S> dx(channels, g.cols());
    for (int c = 0; c < channels; ++c) {
      if (accumulate) {
        ggamma(c, 0) += (g.row(c).array() * xhat.row(c).array()).sum();
        gbeta(c, 0) += g.row(c).sum();
      }
      const auto gh = (g.row(c).array() * gamma(c, 0)).eval();
      const S m1 = gh.mean();
      const S m2 = (gh * xhat.row(c).array()).mean();
      dx.row(c) = (inv_std(c, 0) * (gh - m1 - xhat.row(c).array() * m2)).matrix();
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".gamma", &gamma, &ggamma});
    out.push_back({prefix + ".beta", &beta, &gbeta});
  }
};

/// Normalization over (channels-in-group x time) blocks, per-channel affine.
template <class S>
struct GroupNorm {
  int channels = 0, groups = 1;
  S eps = static_cast<S>(1e-5);
  Mat<S> gamma, beta, ggamma, gbeta;
  Mat<S> xhat;
  Mat<S> inv_std;  // groups x 1

  void init(int c, int g, S e) {
    if (c % g != 0) throw std::invalid_argument("GroupNorm: groups must divide channels");
    channels = c;
    groups = g;
    eps = e;
    gamma = Mat<S>::Ones(c, 1);
    beta = Mat<S>::Zero(c, 1);
    ggamma = Mat<S>::Zero(c, 1);
    gbeta = Mat<S>::Zero(c, 1);
  }

  Mat<S> forward(const Mat<S>& x) {
    const int t = static_cast<int>(x.cols());
    const int per = channels / groups;
    xhat.resize(channels, t);
    inv_std.resize(groups, 1);
    Mat<S> out(channels, t);
    for (int g = 0; g < groups; ++g) {
      const auto block = x.middleRows(g * per, per);
      const S mu = block.mean();
      const S var = (block.array() - mu).square().sum() / (per * t);
      const S inv = S(1) / std::sqrt(var + eps);
      inv_std(g, 0) = inv;
      xhat.middleRows(g * per, per) = ((block.array() - mu) * inv).matrix();
      for (int c = g * per; c < (g + 1) * per; ++c) {
        out.row(c) = (gamma(c, 0) * xhat.row(c).array() + beta(c, 0)).matrix();
      }
    }
    return out;
  }

  Mat<S> backward(const Mat<S>& g, bool accumulate) {
    const int t = static_cast<int>(g.cols());
    const int per = channels / groups;
    Mat<S> dx(channels, t);
    Mat<S> gh(per, t);
    for (int grp = 0; grp < groups; ++grp) {
      for (int c = 0; c < per; ++c) {
        const int row = grp * per + c;
        if (accumulate) {
          ggamma(row, 0) += (g.row(row).array() * xhat.row(row).array()).sum();
          gbeta(row, 0) += g.row(row).sum();
        }
        gh.row(c) = (g.row(row).array() * gamma(row, 0)).matrix();
      }
      const auto xh = xhat.middleRows(grp * per, per);
      const S m1 = gh.mean();
      const S m2 = (gh.array() * xh.array()).mean();
      dx.middleRows(grp * per, per) =
          (inv_std(grp, 0) * (gh.array() - m1 - xh.array() * m2)).matrix();
    }
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".gamma", &gamma, &ggamma});
    out.push_back({prefix + ".beta", &beta, &gbeta});
  }
};

template <class S>
struct LeakyReLU {
  S slope = static_cast<S>(0.2);
  Mat<S> mask;

  Mat<S> forward(const Mat<S>& x) {
    const S a = slope;
    mask = x.unaryExpr([a](S v) { return v > S(0) ? S(1) : a; });
    return x.cwiseProduct(mask);
  }
  Mat<S> backward(const Mat<S>& g) const { return g.cwiseProduct(mask); }
};

/// MIDI-note lookup table, 128 entries of dimension embed_dim.
template <class S>
struct Embedding {
  Mat<S> table, gtable;  // embed_dim x 128
  std::vector<int> notes_cache;

  void init(int embed_dim, Rng& rng) {
    table.resize(embed_dim, 128);
    for (int i = 0; i < table.rows(); ++i) {
      for (int j = 0; j < table.cols(); ++j) {
        table(i, j) = static_cast<S>(uniform_real(rng, -0.5, 0.5));
      }
    }
    gtable = Mat<S>::Zero(table.rows(), table.cols());
  }

  Mat<S> forward(const std::vector<int>& notes) {
    notes_cache = notes;
    Mat<S> out(table.rows(), static_cast<int>(notes.size()));
    for (std::size_t t = 0; t < notes.size(); ++t) out.col(t) = table.col(notes[t]);
    return out;
  }

  void backward(const Mat<S>& g, bool accumulate) {
    if (!accumulate) return;
    for (std::size_t t = 0; t < notes_cache.size(); ++t) {
      gtable.col(notes_cache[t]) += g.col(static_cast<int>(t));
    }
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".table", &table, &gtable});
  }
};

/// Elementwise clamp; gradient passes only inside the open interval.
template <class S>
struct Clamp {
  S lo, hi;
  Mat<S> mask;

  Mat<S> forward(const Mat<S>& x) {
    const S l = lo, h = hi;
    mask = x.unaryExpr([l, h](S v) { return (v > l && v < h) ? S(1) : S(0); });
    return x.unaryExpr([l, h](S v) { return std::min(std::max(v, l), h); });
  }
  Mat<S> backward(const Mat<S>& g) const { return g.cwiseProduct(mask); }
};

/// Nearest-neighbor time upsampling by 2 (each frame repeated).
template <class S>
Mat<S> upsample_time2(const Mat<S>& x) {
  Mat<S> y(x.rows(), x.cols() * 2);
  for (int t = 0; t < x.cols(); ++t) {
    y.col(2 * t) = x.col(t);
    y.col(2 * t + 1) = x.col(t);
  }
  return y;
}

template <class S>
Mat<S> upsample_time2_backward(const Mat<S>& g) {
  Mat<S> d(g.rows(), g.cols() / 2);
  for (int t = 0; t < d.cols(); ++t) d.col(t) = g.col(2 * t) + g.col(2 * t + 1);
  return d;
}

template <class S>
S mean_abs_diff(const Mat<S>& a, const Mat<S>& b) {
  return (a - b).cwiseAbs().sum() / static_cast<S>(a.size());
}

/// d/da of mean|a - b|; the subgradient at zero is taken as 0.
template <class S>
Mat<S> mean_abs_diff_grad(const Mat<S>& a, const Mat<S>& b) {
  const S n = static_cast<S>(a.size());
  return (a - b).unaryExpr([n](S v) { return v > S(0) ? S(1) / n : (v < S(0) ? S(-1) / n : S(0)); });
}

}  // namespace sts::net

#endif  // STS_NET_LAYERS_HPP
