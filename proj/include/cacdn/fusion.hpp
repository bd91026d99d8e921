#pragma once

#include <map>
#include <string>
#include <vector>

#include "cacdn/core_types.hpp"
#include "cacdn/nn.hpp"

// Residual fusion: the change-signal branch (S1 post) passes through a pure
// linear 1x1 projection, while all context features (S1 pre, S2 pre, DEM,
// plus the upsampled coarser fusion output) enter through a conv path whose
// final batchnorm scale starts at zero. Every block is therefore an exact
// identity-plus-nothing map of the projected main branch at initialization;
// context can only help once training moves those scales off zero.

namespace cacdn {

struct FusionConfig {
  enum class Variant { LARGE, SMALL };
  Variant variant = Variant::SMALL;
  std::vector<int> scales;              // coarse -> fine scale divisors
  std::map<int, int> channels_per_scale;

  static FusionConfig large() {
    FusionConfig c;
    c.variant = Variant::LARGE;
    c.scales = {8, 4, 2};
    c.channels_per_scale = {{8, 512}, {4, 256}, {2, 128}};
    return c;
  }
  static FusionConfig small() {
    FusionConfig c;
    c.variant = Variant::SMALL;
    c.scales = {4, 2};
    c.channels_per_scale = {{4, 384}, {2, 128}};
    return c;
  }

  void validate() const {
    if (variant == Variant::LARGE) {
      require(scales == std::vector<int>{8, 4, 2} &&
                  channels_per_scale == std::map<int, int>{{8, 512},
                                                           {4, 256},
                                                           {2, 128}},
              "config_error",
              "large fusion uses scales (8,4,2) with channels (512,256,128)");
    } else {
      require(scales == std::vector<int>{4, 2} &&
                  channels_per_scale == std::map<int, int>{{4, 384}, {2, 128}},
              "config_error",
              "small fusion uses scales (4,2) with channels (384,128)");
    }
  }

  int out_channels(int scale) const { return channels_per_scale.at(scale); }
  int finest_channels() const { return channels_per_scale.at(scales.back()); }
  // bottleneck width of the context path
  static int context_mid_channels(int out_c) { return std::max(16, out_c / 16); }
};

template <typename T>
class ResidualFusionBlock {
 public:
  ResidualFusionBlock() = default;
  // context_channels lists every context input in order, carry included last
  // when present (carry_channels > 0).
  ResidualFusionBlock(const std::string& name, int main_channels,
                      std::vector<int> context_channels, int out_channels,
                      int mid_channels)
      : ctx_channels_(std::move(context_channels)) {
    int ctx_total = 0;
    for (int c : ctx_channels_) ctx_total += c;
    id_proj_ = nn::Conv2d<T>(name + ".id_proj", main_channels, out_channels, 1,
                             1, 0);
    ctx1_ = nn::Conv2d<T>(name + ".ctx1", ctx_total, mid_channels, 1, 1, 0);
    ctx_bn1_ = nn::BatchNorm2d<T>(name + ".ctx_bn1", mid_channels);
    ctx2_ = nn::Conv2d<T>(name + ".ctx2", mid_channels, out_channels, 3, 1, 1);
    ctx_bn2_ =
        nn::BatchNorm2d<T>(name + ".ctx_bn2", out_channels, /*zero_init=*/true);
  }

  TensorT<T> forward(const TensorT<T>& main,
                     const std::vector<const TensorT<T>*>& context,
                     bool train) {
    require(context.size() == ctx_channels_.size(), "shape_mismatch",
            "fusion block: wrong number of context inputs");
    for (const auto* c : context)
      require(c->dim(2) == main.dim(2) && c->dim(3) == main.dim(3),
              "shape_mismatch",
              "fusion block: context spatial dims disagree with main");
    TensorT<T> cat = nn::concat_channels(context);
    TensorT<T> h = ctx_relu_.forward(
        ctx_bn1_.forward(ctx1_.forward(cat), train));
    h = ctx_bn2_.forward(ctx2_.forward(h), train);
    TensorT<T> idn = id_proj_.forward(main);
    for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += idn.data[i];
    return out_relu_.forward(h);
  }

  struct Grads {
    TensorT<T> main;
    std::vector<TensorT<T>> context;
  };

  Grads backward(const TensorT<T>& gy) {
    TensorT<T> g = out_relu_.backward(gy);
    Grads out;
    out.main = id_proj_.backward(g);
    TensorT<T> gcat = ctx1_.backward(ctx_bn1_.backward(ctx_relu_.backward(
        ctx2_.backward(ctx_bn2_.backward(g)))));
    out.context = nn::split_channels(gcat, ctx_channels_);
    return out;
  }

  void init_params(uint64_t seed) {
    id_proj_.init_params(seed);
    ctx1_.init_params(seed);
    ctx_bn1_.init_params(seed);
    ctx2_.init_params(seed);
    ctx_bn2_.init_params(seed);
  }

  void collect(nn::Collector<T>& c) {
    id_proj_.collect(c);
    ctx1_.collect(c);
    ctx_bn1_.collect(c);
    ctx2_.collect(c);
    ctx_bn2_.collect(c);
  }

  nn::Conv2d<T>& identity_projection() { return id_proj_; }

 private:
  std::vector<int> ctx_channels_;
  nn::Conv2d<T> id_proj_, ctx1_, ctx2_;
  nn::BatchNorm2d<T> ctx_bn1_, ctx_bn2_;
  nn::ReLU<T> ctx_relu_, out_relu_;
};

// Iterates the configured scales coarse to fine. At each scale the context is
// [pyr_s1_pre[d], pyr_s2_pre[d] (when enabled), dem resampled to p/d] plus the
// x2-upsampled previous fusion output.
template <typename T>
class FusionStack {
 public:
  FusionStack() = default;
  FusionStack(const std::string& name, FusionConfig cfg,
              const std::map<int, int>& post_channels,
              const std::map<int, int>& pre_channels,
              const std::map<int, int>* s2_channels, int dem_channels)
      : cfg_(std::move(cfg)), use_s2_(s2_channels != nullptr) {
    cfg_.validate();
    int carry_c = 0;
    for (size_t k = 0; k < cfg_.scales.size(); ++k) {
      const int d = cfg_.scales[k];
      require(post_channels.count(d) && pre_channels.count(d) &&
                  (!use_s2_ || s2_channels->count(d)),
              "config_error",
              "missing pyramid level for scale divisor " + std::to_string(d));
      std::vector<int> ctx = {pre_channels.at(d)};
      if (use_s2_) ctx.push_back(s2_channels->at(d));
      ctx.push_back(dem_channels);
      if (k > 0) ctx.push_back(carry_c);
      const int out_c = cfg_.out_channels(d);
      blocks_.emplace_back(name + ".scale" + std::to_string(d),
                           post_channels.at(d), std::move(ctx), out_c,
                           FusionConfig::context_mid_channels(out_c));
      carry_c = out_c;
    }
    dem_resize_.resize(cfg_.scales.size());
    carry_up_.resize(cfg_.scales.size());
  }

  const FusionConfig& config() const { return cfg_; }
  bool uses_s2() const { return use_s2_; }

  struct Result {
    TensorT<T> fused;  // finest scale, [N, C_finest, p/2, p/2]
    std::vector<TensorT<T>> per_scale;
  };

  Result forward(const FeaturePyramidT<T>& pyr_post,
                 const FeaturePyramidT<T>& pyr_pre,
                 const FeaturePyramidT<T>* pyr_s2, const TensorT<T>& dem_feat,
                 bool train) {
    require(use_s2_ == (pyr_s2 != nullptr), "config_error",
            "fusion stack built with a different S2 setting");
    Result res;
    TensorT<T> carry;
    for (size_t k = 0; k < cfg_.scales.size(); ++k) {
      const int d = cfg_.scales[k];
      const TensorT<T>& main = level(pyr_post, d);
      const TensorT<T>& pre = level(pyr_pre, d);
      TensorT<T> dem_d = dem_resize_[k].forward(dem_feat, main.dim(2),
                                                main.dim(3));
      std::vector<const TensorT<T>*> ctx = {&pre};
      if (use_s2_) ctx.push_back(&level(*pyr_s2, d));
      ctx.push_back(&dem_d);
      TensorT<T> up;
      if (k > 0) {
        up = carry_up_[k].forward(carry);
        ctx.push_back(&up);
      }
      carry = blocks_[k].forward(main, ctx, train);
      res.per_scale.push_back(carry);
    }
    res.fused = std::move(carry);
    return res;
  }

  struct Grads {
    std::map<int, TensorT<T>> post, pre, s2;
    TensorT<T> dem;
  };

  Grads backward(const TensorT<T>& g_fused) {
    Grads out;
    TensorT<T> g = g_fused;
    for (size_t k = cfg_.scales.size(); k-- > 0;) {
      const int d = cfg_.scales[k];
      auto bg = blocks_[k].backward(g);
      out.post[d] = std::move(bg.main);
      size_t idx = 0;
      out.pre[d] = std::move(bg.context[idx++]);
      if (use_s2_) out.s2[d] = std::move(bg.context[idx++]);
      nn::add_into(out.dem, dem_resize_[k].backward(bg.context[idx++]));
      if (k > 0) g = carry_up_[k].backward(bg.context[idx]);
    }
    return out;
  }

  void init_params(uint64_t seed) {
    for (auto& b : blocks_) b.init_params(seed);
  }

  void collect(nn::Collector<T>& c) {
    for (auto& b : blocks_) b.collect(c);
  }

  ResidualFusionBlock<T>& block(size_t k) { return blocks_[k]; }

 private:
  static const TensorT<T>& level(const FeaturePyramidT<T>& pyr, int d) {
    auto it = pyr.levels.find(d);
    if (it == pyr.levels.end())
      fail("shape_mismatch",
           "missing pyramid level for scale divisor " + std::to_string(d));
    return it->second;
  }

  FusionConfig cfg_;
  bool use_s2_ = true;
  std::vector<ResidualFusionBlock<T>> blocks_;
  std::vector<nn::ResizeNearest<T>> dem_resize_;
  std::vector<nn::UpsampleNearest2x<T>> carry_up_;
};

}  // namespace cacdn
