#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cacdn/common.hpp"
#include "cacdn/tensor.hpp"

// Minimal layer set with hand-written backward passes, sized for this
// project: stride-1/2 convolutions via im2col + GEMM, batch normalization,
// ReLU/sigmoid, nearest-neighbour upsampling/resampling and channel
// concatenation. Every layer caches what its backward needs; composite
// modules chain layer backwards in reverse order.
//
// Determinism contract: given identical inputs, parameters and mode, forward
// and backward are bitwise reproducible. Parallel loops only ever write to
// disjoint per-sample slices, and all cross-sample reductions run in index
// order on a single thread.

namespace cacdn::nn {

template <typename T>
using MatRM =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapM = Eigen::Map<const MatRM<T>>;

// --- parameter registry ------------------------------------------------------

template <typename T>
struct ParamRef {
  std::string name;
  TensorT<T>* value = nullptr;
  TensorT<T>* grad = nullptr;
};

template <typename T>
struct BufferRef {
  std::string name;
  TensorT<T>* value = nullptr;
};

template <typename T>
struct Collector {
  std::vector<ParamRef<T>> params;
  std::vector<BufferRef<T>> buffers;

  void param(const std::string& name, TensorT<T>& v, TensorT<T>& g) {
    params.push_back({name, &v, &g});
  }
  void buffer(const std::string& name, TensorT<T>& v) {
    buffers.push_back({name, &v});
  }
};

// Name-keyed init seed so that two models sharing a submodule name start
// from identical weights for that submodule regardless of what else they
// contain.
inline uint64_t param_seed(uint64_t model_seed, const std::string& name) {
  return mix_seed(model_seed, fnv1a64(name));
}

// --- im2col ------------------------------------------------------------------

template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int stride, int pad,
            int oh, int ow, T* cols) {
  for (int ch = 0; ch < c; ++ch) {
    const T* plane = x + static_cast<size_t>(ch) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = cols + (static_cast<size_t>(ch) * k * k + ki * k + kj) *
                            (static_cast<size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ki - pad;
          T* dst = row + static_cast<size_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + ow, T(0));
            continue;
          }
          const T* src = plane + static_cast<size_t>(iy) * w;
          if (stride == 1) {
            int x0 = std::max(0, pad - kj);
            int x1 = std::min(ow, w + pad - kj);
            if (x0 > 0) std::fill(dst, dst + x0, T(0));
            if (x1 > x0) std::copy(src + x0 + kj - pad, src + x1 + kj - pad,
                                   dst + x0);
            if (x1 < ow) std::fill(dst + std::max(x0, x1), dst + ow, T(0));
          } else {
            for (int ox = 0; ox < ow; ++ox) {
              int ix = ox * stride + kj - pad;
              dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, int c, int h, int w, int k, int stride, int pad,
                int oh, int ow, T* x) {
  for (int ch = 0; ch < c; ++ch) {
    T* plane = x + static_cast<size_t>(ch) * h * w;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = cols + (static_cast<size_t>(ch) * k * k + ki * k + kj) *
                                  (static_cast<size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          int iy = oy * stride + ki - pad;
          if (iy < 0 || iy >= h) continue;
          T* dst = plane + static_cast<size_t>(iy) * w;
          const T* src = row + static_cast<size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) {
            int ix = ox * stride + kj - pad;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// --- layers ------------------------------------------------------------------

template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, int in_c, int out_c, int k, int stride, int pad,
         bool bias = true)
      : name_(std::move(name)),
        in_c_(in_c),
        out_c_(out_c),
        k_(k),
        stride_(stride),
        pad_(pad),
        has_bias_(bias) {
    w_ = TensorT<T>({out_c, in_c * k * k});
    gw_ = TensorT<T>({out_c, in_c * k * k});
    if (has_bias_) {
      b_ = TensorT<T>({out_c});
      gb_ = TensorT<T>({out_c});
    }
  }

  void init_params(uint64_t model_seed) {
    Rng rng(param_seed(model_seed, name_ + ".w"));
    double stdev = std::sqrt(2.0 / (static_cast<double>(in_c_) * k_ * k_));
    for (auto& v : w_.data) v = static_cast<T>(rng.normal() * stdev);
    if (has_bias_) b_.fill(T(0));
  }

  TensorT<T> forward(const TensorT<T>& x) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != in_c_)
      fail("shape_mismatch", name_ + ": input channels " +
                                 std::to_string(x.dim(1)) + ", want " +
                                 std::to_string(in_c_));
    oh_ = (h + 2 * pad_ - k_) / stride_ + 1;
    ow_ = (w + 2 * pad_ - k_) / stride_ + 1;
    x_ = x;
    TensorT<T> y({n, out_c_, oh_, ow_});
    const size_t spatial = static_cast<size_t>(oh_) * ow_;
    const size_t crows = static_cast<size_t>(in_c_) * k_ * k_;
    scratch_.resize(static_cast<size_t>(n) * crows * spatial);
    parallel_for(n, [&](int i) {
      const T* xs = x.ptr() + static_cast<size_t>(i) * in_c_ * h * w;
      T* ys = y.ptr() + static_cast<size_t>(i) * out_c_ * spatial;
      T* cols = scratch_.data() + static_cast<size_t>(i) * crows * spatial;
      const T* cols_ptr = cols;
      if (is_pointwise()) {
        cols_ptr = xs;  // 1x1 stride-1: columns are the input itself
      } else {
        im2col(xs, in_c_, h, w, k_, stride_, pad_, oh_, ow_, cols);
      }
      CMapM<T> wm(w_.ptr(), out_c_, static_cast<Eigen::Index>(crows));
      CMapM<T> cm(cols_ptr, static_cast<Eigen::Index>(crows),
                  static_cast<Eigen::Index>(spatial));
      MapM<T> ym(ys, out_c_, static_cast<Eigen::Index>(spatial));
      ym.noalias() = wm * cm;
      if (has_bias_)
        for (int oc = 0; oc < out_c_; ++oc)
          ym.row(oc).array() += b_.data[static_cast<size_t>(oc)];
    });
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const size_t spatial = static_cast<size_t>(oh_) * ow_;
    const size_t crows = static_cast<size_t>(in_c_) * k_ * k_;
    TensorT<T> gx({n, in_c_, h, w});
    // per-sample weight-gradient partials, reduced in sample order below
    std::vector<TensorT<T>> gw_part(static_cast<size_t>(n));
    std::vector<TensorT<T>> gb_part(static_cast<size_t>(n));
    scratch_.resize(static_cast<size_t>(n) * crows * spatial);
    gscratch_.resize(static_cast<size_t>(n) * crows * spatial);
    parallel_for(n, [&](int i) {
      const T* xs = x_.ptr() + static_cast<size_t>(i) * in_c_ * h * w;
      const T* gys = gy.ptr() + static_cast<size_t>(i) * out_c_ * spatial;
      T* cols = scratch_.data() + static_cast<size_t>(i) * crows * spatial;
      T* gcols = gscratch_.data() + static_cast<size_t>(i) * crows * spatial;
      const T* cols_ptr = cols;
      if (is_pointwise()) {
        cols_ptr = xs;
      } else {
        im2col(xs, in_c_, h, w, k_, stride_, pad_, oh_, ow_, cols);
      }
      CMapM<T> gym(gys, out_c_, static_cast<Eigen::Index>(spatial));
      CMapM<T> cm(cols_ptr, static_cast<Eigen::Index>(crows),
                  static_cast<Eigen::Index>(spatial));
      auto& gwp = gw_part[static_cast<size_t>(i)];
      gwp = TensorT<T>({out_c_, static_cast<int>(crows)});
      MapM<T> gwm(gwp.ptr(), out_c_, static_cast<Eigen::Index>(crows));
      gwm.noalias() = gym * cm.transpose();
      if (has_bias_) {
        auto& gbp = gb_part[static_cast<size_t>(i)];
        gbp = TensorT<T>({out_c_});
        for (int oc = 0; oc < out_c_; ++oc)
          gbp.data[static_cast<size_t>(oc)] = gym.row(oc).sum();
      }
      CMapM<T> wm(w_.ptr(), out_c_, static_cast<Eigen::Index>(crows));
      T* gxs = gx.ptr() + static_cast<size_t>(i) * in_c_ * h * w;
      if (is_pointwise()) {
        MapM<T> gxm(gxs, static_cast<Eigen::Index>(crows),
                    static_cast<Eigen::Index>(spatial));
        gxm.noalias() = wm.transpose() * gym;
      } else {
        MapM<T> gcm(gcols, static_cast<Eigen::Index>(crows),
                    static_cast<Eigen::Index>(spatial));
        gcm.noalias() = wm.transpose() * gym;
        std::fill(gxs, gxs + static_cast<size_t>(in_c_) * h * w, T(0));
        col2im_add(gcols, in_c_, h, w, k_, stride_, pad_, oh_, ow_, gxs);
      }
    });
    for (int i = 0; i < n; ++i) {
      const auto& gwp = gw_part[static_cast<size_t>(i)];
      for (size_t j = 0; j < gw_.data.size(); ++j) gw_.data[j] += gwp.data[j];
      if (has_bias_) {
        const auto& gbp = gb_part[static_cast<size_t>(i)];
        for (size_t j = 0; j < gb_.data.size(); ++j)
          gb_.data[j] += gbp.data[j];
      }
    }
    return gx;
  }

  void collect(Collector<T>& c) {
    c.param(name_ + ".w", w_, gw_);
    if (has_bias_) c.param(name_ + ".b", b_, gb_);
  }

  void release_cache() { x_ = TensorT<T>(); }

  TensorT<T>& weight() { return w_; }
  TensorT<T>& bias() { return b_; }
  int out_channels() const { return out_c_; }

 private:
  bool is_pointwise() const { return k_ == 1 && stride_ == 1 && pad_ == 0; }

  std::string name_;
  int in_c_ = 0, out_c_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
  bool has_bias_ = true;
  TensorT<T> w_, gw_, b_, gb_;
  TensorT<T> x_;
  int oh_ = 0, ow_ = 0;
  std::vector<T> scratch_, gscratch_;
};

template <typename T>
class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  BatchNorm2d(std::string name, int channels, bool zero_init_scale = false)
      : name_(std::move(name)),
        c_(channels),
        zero_init_(zero_init_scale) {
    gamma_ = TensorT<T>({c_});
    beta_ = TensorT<T>({c_});
    ggamma_ = TensorT<T>({c_});
    gbeta_ = TensorT<T>({c_});
    running_mean_ = TensorT<T>({c_});
    running_var_ = TensorT<T>::full({c_}, T(1));
    reset_params();
  }

  void reset_params() {
    gamma_.fill(zero_init_ ? T(0) : T(1));
    beta_.fill(T(0));
    running_mean_.fill(T(0));
    running_var_.fill(T(1));
  }

  void init_params(uint64_t) { reset_params(); }

  TensorT<T> forward(const TensorT<T>& x, bool train) {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != c_)
      fail("shape_mismatch", name_ + ": channels " + std::to_string(x.dim(1)));
    train_ = train;
    x_ = x;
    mean_ = TensorT<T>({c_});
    invstd_ = TensorT<T>({c_});
    const size_t plane = static_cast<size_t>(h) * w;
    const size_t m = static_cast<size_t>(n) * plane;
    for (int ch = 0; ch < c_; ++ch) {
      double mu, var;
      if (train) {
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
          const T* p = x.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
          for (size_t j = 0; j < plane; ++j) {
            double v = static_cast<double>(p[j]);
            s += v;
            s2 += v * v;
          }
        }
        mu = s / static_cast<double>(m);
        var = s2 / static_cast<double>(m) - mu * mu;
        if (var < 0) var = 0;
        double unbiased = m > 1 ? var * static_cast<double>(m) /
                                      static_cast<double>(m - 1)
                                : var;
        running_mean_.data[ch] = static_cast<T>(
            (1.0 - momentum_) * running_mean_.data[ch] + momentum_ * mu);
        running_var_.data[ch] = static_cast<T>(
            (1.0 - momentum_) * running_var_.data[ch] + momentum_ * unbiased);
      } else {
        mu = static_cast<double>(running_mean_.data[ch]);
        var = static_cast<double>(running_var_.data[ch]);
      }
      mean_.data[ch] = static_cast<T>(mu);
      invstd_.data[ch] = static_cast<T>(1.0 / std::sqrt(var + eps_));
    }
    TensorT<T> y({n, c_, h, w});
    parallel_for(n, [&](int i) {
      for (int ch = 0; ch < c_; ++ch) {
        const T* p = x.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
        T* q = y.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
        const T g = gamma_.data[ch], b = beta_.data[ch];
        const T mu = mean_.data[ch], is = invstd_.data[ch];
        for (size_t j = 0; j < plane; ++j) q[j] = g * (p[j] - mu) * is + b;
      }
    });
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    const int n = x_.dim(0), h = x_.dim(2), w = x_.dim(3);
    const size_t plane = static_cast<size_t>(h) * w;
    const double m = static_cast<double>(n) * plane;
    TensorT<T> gx({n, c_, h, w});
    for (int ch = 0; ch < c_; ++ch) {
      const T mu = mean_.data[ch], is = invstd_.data[ch];
      double sum_gy = 0.0, sum_gy_xhat = 0.0;
      for (int i = 0; i < n; ++i) {
        const T* gp = gy.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
        const T* xp = x_.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
        for (size_t j = 0; j < plane; ++j) {
          sum_gy += gp[j];
          sum_gy_xhat += static_cast<double>(gp[j]) * (xp[j] - mu) * is;
        }
      }
      ggamma_.data[ch] += static_cast<T>(sum_gy_xhat);
      gbeta_.data[ch] += static_cast<T>(sum_gy);
      const T g = gamma_.data[ch];
      if (train_) {
        const T mean_gy = static_cast<T>(sum_gy / m);
        const T mean_gy_xhat = static_cast<T>(sum_gy_xhat / m);
        for (int i = 0; i < n; ++i) {
          const T* gp = gy.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
          const T* xp = x_.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
          T* op = gx.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
          for (size_t j = 0; j < plane; ++j) {
            T xhat = (xp[j] - mu) * is;
            op[j] = g * is * (gp[j] - mean_gy - xhat * mean_gy_xhat);
          }
        }
      } else {
        for (int i = 0; i < n; ++i) {
          const T* gp = gy.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
          T* op = gx.ptr() + (static_cast<size_t>(i) * c_ + ch) * plane;
          for (size_t j = 0; j < plane; ++j) op[j] = g * is * gp[j];
        }
      }
    }
    return gx;
  }

  void collect(Collector<T>& c) {
    c.param(name_ + ".gamma", gamma_, ggamma_);
    c.param(name_ + ".beta", beta_, gbeta_);
    c.buffer(name_ + ".running_mean", running_mean_);
    c.buffer(name_ + ".running_var", running_var_);
  }

  void release_cache() { x_ = TensorT<T>(); }

 private:
  std::string name_;
  int c_ = 0;
  bool zero_init_ = false;
  double eps_ = 1e-5, momentum_ = 0.1;
  TensorT<T> gamma_, beta_, ggamma_, gbeta_;
  TensorT<T> running_mean_, running_var_;
  TensorT<T> x_, mean_, invstd_;
  bool train_ = true;
};

template <typename T>
class ReLU {
 public:
  TensorT<T> forward(const TensorT<T>& x) {
    y_ = x;
    for (auto& v : y_.data) v = v > T(0) ? v : T(0);
    return y_;
  }
  TensorT<T> backward(const TensorT<T>& gy) {
    TensorT<T> gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i)
      if (!(y_.data[i] > T(0))) gx.data[i] = T(0);
    return gx;
  }
  void release_cache() { y_ = TensorT<T>(); }

 private:
  TensorT<T> y_;
};

template <typename T>
class Sigmoid {
 public:
  TensorT<T> forward(const TensorT<T>& x) {
    y_ = x;
    for (auto& v : y_.data)
      v = T(1) / (T(1) + std::exp(-static_cast<double>(v)));
    return y_;
  }
  TensorT<T> backward(const TensorT<T>& gy) {
    TensorT<T> gx = gy;
    for (size_t i = 0; i < gx.data.size(); ++i)
      gx.data[i] *= y_.data[i] * (T(1) - y_.data[i]);
    return gx;
  }
  void release_cache() { y_ = TensorT<T>(); }

 private:
  TensorT<T> y_;
};

template <typename T>
class UpsampleNearest2x {
 public:
  TensorT<T> forward(const TensorT<T>& x) {
    in_shape_ = x.shape;
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    TensorT<T> y({n, c, 2 * h, 2 * w});
    parallel_for(n, [&](int i) {
      for (int ch = 0; ch < c; ++ch) {
        const T* p =
            x.ptr() + (static_cast<size_t>(i) * c + ch) * h * w;
        T* q = y.ptr() + (static_cast<size_t>(i) * c + ch) * 4 * h * w;
        for (int yy = 0; yy < 2 * h; ++yy) {
          const T* row = p + static_cast<size_t>(yy / 2) * w;
          T* out = q + static_cast<size_t>(yy) * 2 * w;
          for (int xx = 0; xx < 2 * w; ++xx) out[xx] = row[xx / 2];
        }
      }
    });
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2],
              w = in_shape_[3];
    TensorT<T> gx({n, c, h, w});
    parallel_for(n, [&](int i) {
      for (int ch = 0; ch < c; ++ch) {
        T* p = gx.ptr() + (static_cast<size_t>(i) * c + ch) * h * w;
        const T* q =
            gy.ptr() + (static_cast<size_t>(i) * c + ch) * 4 * h * w;
        for (int yy = 0; yy < 2 * h; ++yy) {
          T* row = p + static_cast<size_t>(yy / 2) * w;
          const T* in = q + static_cast<size_t>(yy) * 2 * w;
          for (int xx = 0; xx < 2 * w; ++xx) row[xx / 2] += in[xx];
        }
      }
    });
    return gx;
  }

 private:
  std::vector<int> in_shape_;
};

// Nearest-neighbour resample to an arbitrary target size (used to bring the
// DEM feature map to each fusion scale).
template <typename T>
class ResizeNearest {
 public:
  TensorT<T> forward(const TensorT<T>& x, int out_h, int out_w) {
    in_shape_ = x.shape;
    out_h_ = out_h;
    out_w_ = out_w;
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    TensorT<T> y({n, c, out_h, out_w});
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        const T* p = x.ptr() + (static_cast<size_t>(i) * c + ch) * h * w;
        T* q = y.ptr() +
               (static_cast<size_t>(i) * c + ch) * out_h * out_w;
        for (int yy = 0; yy < out_h; ++yy) {
          int sy = static_cast<int>(static_cast<int64_t>(yy) * h / out_h);
          for (int xx = 0; xx < out_w; ++xx) {
            int sx = static_cast<int>(static_cast<int64_t>(xx) * w / out_w);
            q[static_cast<size_t>(yy) * out_w + xx] =
                p[static_cast<size_t>(sy) * w + sx];
          }
        }
      }
    return y;
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    const int n = in_shape_[0], c = in_shape_[1], h = in_shape_[2],
              w = in_shape_[3];
    TensorT<T> gx({n, c, h, w});
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        T* p = gx.ptr() + (static_cast<size_t>(i) * c + ch) * h * w;
        const T* q =
            gy.ptr() + (static_cast<size_t>(i) * c + ch) * out_h_ * out_w_;
        for (int yy = 0; yy < out_h_; ++yy) {
          int sy = static_cast<int>(static_cast<int64_t>(yy) * h / out_h_);
          for (int xx = 0; xx < out_w_; ++xx) {
            int sx = static_cast<int>(static_cast<int64_t>(xx) * w / out_w_);
            p[static_cast<size_t>(sy) * w + sx] +=
                q[static_cast<size_t>(yy) * out_w_ + xx];
          }
        }
      }
    return gx;
  }

 private:
  std::vector<int> in_shape_;
  int out_h_ = 0, out_w_ = 0;
};

// --- channel concatenation ---------------------------------------------------

template <typename T>
TensorT<T> concat_channels(const std::vector<const TensorT<T>*>& xs) {
  const int n = xs[0]->dim(0), h = xs[0]->dim(2), w = xs[0]->dim(3);
  int c_total = 0;
  for (const auto* x : xs) {
    if (x->dim(0) != n || x->dim(2) != h || x->dim(3) != w)
      fail("shape_mismatch", "concat: spatial/batch dims disagree (" +
                                 x->shape_str() + " vs " +
                                 xs[0]->shape_str() + ")");
    c_total += x->dim(1);
  }
  TensorT<T> y({n, c_total, h, w});
  const size_t plane = static_cast<size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    size_t off = static_cast<size_t>(i) * c_total * plane;
    for (const auto* x : xs) {
      const size_t sz = static_cast<size_t>(x->dim(1)) * plane;
      std::copy_n(x->ptr() + static_cast<size_t>(i) * sz, sz, y.ptr() + off);
      off += sz;
    }
  }
  return y;
}

// Splits a concat gradient back into per-input gradients (fresh tensors).
template <typename T>
std::vector<TensorT<T>> split_channels(const TensorT<T>& g,
                                       const std::vector<int>& channels) {
  const int n = g.dim(0), h = g.dim(2), w = g.dim(3);
  const size_t plane = static_cast<size_t>(h) * w;
  std::vector<TensorT<T>> out;
  out.reserve(channels.size());
  for (int c : channels) out.emplace_back(std::vector<int>{n, c, h, w});
  for (int i = 0; i < n; ++i) {
    size_t off = static_cast<size_t>(i) * g.dim(1) * plane;
    for (size_t k = 0; k < channels.size(); ++k) {
      const size_t sz = static_cast<size_t>(channels[k]) * plane;
      std::copy_n(g.ptr() + off, sz,
                  out[k].ptr() + static_cast<size_t>(i) * sz);
      off += sz;
    }
  }
  return out;
}

template <typename T>
void add_into(TensorT<T>& dst, const TensorT<T>& src) {
  if (dst.empty()) {
    dst = src;
    return;
  }
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace cacdn::nn
