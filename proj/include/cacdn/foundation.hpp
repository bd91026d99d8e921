#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cacdn/core_types.hpp"
#include "cacdn/losses.hpp"
#include "cacdn/nn.hpp"

// Per-modality autoencoder: residual-bottleneck encoder (stride-2 stem, one
// stride-1 stage, then stride-2 stages) and a decoder of upsampling blocks
// (conv3x3 -> batchnorm -> x2 nearest upsample -> ReLU) with skip
// concatenation, ending in a 1x1 conv + sigmoid reconstruction head. Decoder
// block outputs double their spatial size each step and are exposed as the
// feature pyramid at the configured scale divisors.

namespace cacdn {

struct AutoencoderConfig {
  int in_channels = 2;
  // number of x2 reductions: stem + (levels-1) strided stages; the large
  // variant uses 4, the small one 3
  int levels = 3;
  int stem_channels = 16;
  std::vector<int> stage_channels;    // one per stage; stage 0 is stride 1
  std::vector<int> blocks_per_stage;  // bottleneck blocks per stage
  std::vector<int> decoder_channels;  // output channels per upsampling block
  std::vector<int> tap_scales;        // pyramid scale divisors, coarse first

  // Stage plan is the ResNet-50 one (256, 512, 1024, 2048) scaled by
  // width_mult; full_scale restores full width and the (3,4,6,...) depths.
  static AutoencoderConfig large(int in_channels, double width_mult = 0.25,
                                 bool full_scale = false) {
    return make(in_channels, 4, width_mult, full_scale);
  }
  static AutoencoderConfig small(int in_channels, double width_mult = 0.25,
                                 bool full_scale = false) {
    return make(in_channels, 3, width_mult, full_scale);
  }

  static AutoencoderConfig make(int in_channels, int levels, double width_mult,
                                bool full_scale) {
    if (full_scale) width_mult = 1.0;
    AutoencoderConfig c;
    c.in_channels = in_channels;
    c.levels = levels;
    c.stem_channels = std::max(8, static_cast<int>(64 * width_mult + 0.5));
    static const int kPlan[4] = {256, 512, 1024, 2048};
    static const int kDepths[4] = {3, 4, 6, 3};
    static const int kDecoder[4] = {256, 192, 96, 48};  // at full width
    for (int i = 0; i < levels; ++i) {
      c.stage_channels.push_back(
          std::max(16, static_cast<int>(kPlan[i] * width_mult + 0.5)));
      c.blocks_per_stage.push_back(full_scale ? kDepths[i] : 1);
    }
    for (int i = 4 - levels; i < 4; ++i)
      c.decoder_channels.push_back(
          std::max(12, static_cast<int>(kDecoder[i] * width_mult + 0.5)));
    for (int d = 1 << (levels - 1); d >= 2; d /= 2) c.tap_scales.push_back(d);
    return c;
  }

  void validate() const {
    require(in_channels >= 1, "config_error", "in_channels must be >= 1");
    require(levels >= 2, "config_error", "autoencoder needs at least 2 levels");
    require(static_cast<int>(stage_channels.size()) == levels, "config_error",
            "stage_channels must have one entry per level");
    require(static_cast<int>(blocks_per_stage.size()) == levels, "config_error",
            "blocks_per_stage must have one entry per level");
    require(static_cast<int>(decoder_channels.size()) == levels, "config_error",
            "decoder_channels must have one entry per level");
    for (int d : tap_scales)
      require(d >= 2 && d < (1 << levels) && ((d & (d - 1)) == 0),
              "config_error", "tap scale must be a power of two below 2^levels");
  }

  int bottleneck_divisor() const { return 1 << levels; }
  int bottleneck_channels() const { return stage_channels.back(); }

  // channels of the pyramid level at scale divisor d
  int tap_channels(int d) const {
    for (int i = 0; i < levels; ++i)
      if ((1 << (levels - 1 - i)) == d) return decoder_channels[i];
    fail("config_error", "no decoder block at scale divisor " +
                             std::to_string(d));
  }
};

struct ReconstructionLossWeights {
  double w_ce = 0.5;
  double w_mse = 0.5;

  void validate() const {
    require(std::abs(w_ce + w_mse - 1.0) < 1e-9, "config_error",
            "reconstruction loss weights must sum to 1");
  }
};

struct ReconstructionLoss {
  double total = 0.0;
  double l_ce = 0.0;
  double l_mse = 0.0;
  // distance-to-perfect variant (cross-entropy excess over the target
  // entropy floor); same gradient as total, zero iff recon == target
  double excess = 0.0;
};

template <typename T>
ReconstructionLoss reconstruction_loss(const TensorT<T>& recon,
                                       const TensorT<T>& target,
                                       const ReconstructionLossWeights& w) {
  w.validate();
  ReconstructionLoss r;
  r.l_ce = soft_bce_mean(recon, target);
  r.l_mse = mse_mean(recon, target);
  r.total = w.w_ce * r.l_ce + w.w_mse * r.l_mse;
  r.excess = w.w_ce * soft_bce_excess_mean(recon, target) + w.w_mse * r.l_mse;
  return r;
}

template <typename T>
ReconstructionLoss reconstruction_loss_grad(const TensorT<T>& recon,
                                            const TensorT<T>& target,
                                            const ReconstructionLossWeights& w,
                                            TensorT<T>& grad,
                                            double grad_scale) {
  w.validate();
  ReconstructionLoss r;
  r.l_ce = soft_bce_mean_grad(recon, target, grad, w.w_ce * grad_scale);
  r.l_mse = mse_mean_grad(recon, target, grad, w.w_mse * grad_scale);
  r.total = w.w_ce * r.l_ce + w.w_mse * r.l_mse;
  r.excess = w.w_ce * soft_bce_excess_mean(recon, target) + w.w_mse * r.l_mse;
  return r;
}

// --- building blocks ----------------------------------------------------------

template <typename T>
class BottleneckBlock {
 public:
  BottleneckBlock() = default;
  BottleneckBlock(const std::string& name, int in_c, int out_c, int stride)
      : has_proj_(stride != 1 || in_c != out_c) {
    const int mid = std::max(4, out_c / 4);
    c1_ = nn::Conv2d<T>(name + ".conv1", in_c, mid, 1, 1, 0);
    b1_ = nn::BatchNorm2d<T>(name + ".bn1", mid);
    c2_ = nn::Conv2d<T>(name + ".conv2", mid, mid, 3, stride, 1);
    b2_ = nn::BatchNorm2d<T>(name + ".bn2", mid);
    c3_ = nn::Conv2d<T>(name + ".conv3", mid, out_c, 1, 1, 0);
    b3_ = nn::BatchNorm2d<T>(name + ".bn3", out_c);
    if (has_proj_) {
      cp_ = nn::Conv2d<T>(name + ".proj", in_c, out_c, 1, stride, 0);
      bp_ = nn::BatchNorm2d<T>(name + ".proj_bn", out_c);
    }
  }

  TensorT<T> forward(const TensorT<T>& x, bool train) {
    TensorT<T> idn = has_proj_ ? bp_.forward(cp_.forward(x), train) : x;
    TensorT<T> h = r1_.forward(b1_.forward(c1_.forward(x), train));
    h = r2_.forward(b2_.forward(c2_.forward(h), train));
    h = b3_.forward(c3_.forward(h), train);
    for (size_t i = 0; i < h.data.size(); ++i) h.data[i] += idn.data[i];
    return r3_.forward(h);
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    TensorT<T> g = r3_.backward(gy);
    TensorT<T> gx =
        c1_.backward(b1_.backward(r1_.backward(c2_.backward(b2_.backward(
            r2_.backward(c3_.backward(b3_.backward(g))))))));
    if (has_proj_) {
      TensorT<T> gi = cp_.backward(bp_.backward(g));
      nn::add_into(gx, gi);
    } else {
      nn::add_into(gx, g);
    }
    return gx;
  }

  void init_params(uint64_t seed) {
    c1_.init_params(seed);
    c2_.init_params(seed);
    c3_.init_params(seed);
    b1_.init_params(seed);
    b2_.init_params(seed);
    b3_.init_params(seed);
    if (has_proj_) {
      cp_.init_params(seed);
      bp_.init_params(seed);
    }
  }

  void collect(nn::Collector<T>& c) {
    c1_.collect(c);
    b1_.collect(c);
    c2_.collect(c);
    b2_.collect(c);
    c3_.collect(c);
    b3_.collect(c);
    if (has_proj_) {
      cp_.collect(c);
      bp_.collect(c);
    }
  }

 private:
  bool has_proj_ = false;
  nn::Conv2d<T> c1_, c2_, c3_, cp_;
  nn::BatchNorm2d<T> b1_, b2_, b3_, bp_;
  nn::ReLU<T> r1_, r2_, r3_;
};

// conv3x3 -> batchnorm -> x2 nearest upsample -> ReLU
template <typename T>
class UpsampleBlock {
 public:
  UpsampleBlock() = default;
  UpsampleBlock(const std::string& name, int in_c, int out_c) {
    conv_ = nn::Conv2d<T>(name + ".conv", in_c, out_c, 3, 1, 1);
    bn_ = nn::BatchNorm2d<T>(name + ".bn", out_c);
  }

  TensorT<T> forward(const TensorT<T>& x, bool train) {
    return relu_.forward(up_.forward(bn_.forward(conv_.forward(x), train)));
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    return conv_.backward(bn_.backward(up_.backward(relu_.backward(gy))));
  }

  void init_params(uint64_t seed) {
    conv_.init_params(seed);
    bn_.init_params(seed);
  }

  void collect(nn::Collector<T>& c) {
    conv_.collect(c);
    bn_.collect(c);
  }

 private:
  nn::Conv2d<T> conv_;
  nn::BatchNorm2d<T> bn_;
  nn::UpsampleNearest2x<T> up_;
  nn::ReLU<T> relu_;
};

// --- autoencoder ----------------------------------------------------------------

template <typename T>
class Autoencoder {
 public:
  struct EncodeOut {
    TensorT<T> bottleneck;
    std::vector<TensorT<T>> skips;  // stage outputs, fine to coarse
  };
  struct Output {
    TensorT<T> recon;                   // [N, C_in, p, p]
    std::map<int, TensorT<T>> pyramid;  // divisor -> [N, C_d, p/d, p/d]
  };

  Autoencoder() = default;
  Autoencoder(std::string name, AutoencoderConfig cfg)
      : name_(std::move(name)), cfg_(std::move(cfg)) {
    cfg_.validate();
    stem_conv_ = nn::Conv2d<T>(name_ + ".stem.conv", cfg_.in_channels,
                               cfg_.stem_channels, 7, 2, 3);
    stem_bn_ = nn::BatchNorm2d<T>(name_ + ".stem.bn", cfg_.stem_channels);
    int in_c = cfg_.stem_channels;
    for (int s = 0; s < cfg_.levels; ++s) {
      const int out_c = cfg_.stage_channels[static_cast<size_t>(s)];
      std::vector<BottleneckBlock<T>> stage;
      for (int b = 0; b < cfg_.blocks_per_stage[static_cast<size_t>(s)]; ++b) {
        const int stride = (s > 0 && b == 0) ? 2 : 1;
        stage.emplace_back(name_ + ".stage" + std::to_string(s) + ".block" +
                               std::to_string(b),
                           b == 0 ? in_c : out_c, out_c, stride);
      }
      stages_.push_back(std::move(stage));
      in_c = out_c;
    }
    for (int i = 0; i < cfg_.levels; ++i) {
      const int dec_in = decoder_in_channels(i);
      dec_blocks_.emplace_back(name_ + ".dec" + std::to_string(i), dec_in,
                               cfg_.decoder_channels[static_cast<size_t>(i)]);
    }
    recon_conv_ = nn::Conv2d<T>(name_ + ".recon.conv",
                                cfg_.decoder_channels.back(),
                                cfg_.in_channels, 1, 1, 0);
  }

  const AutoencoderConfig& config() const { return cfg_; }
  const std::string& name() const { return name_; }

  void init_params(uint64_t model_seed) {
    stem_conv_.init_params(model_seed);
    stem_bn_.init_params(model_seed);
    for (auto& stage : stages_)
      for (auto& b : stage) b.init_params(model_seed);
    for (auto& d : dec_blocks_) d.init_params(model_seed);
    recon_conv_.init_params(model_seed);
  }

  void collect(nn::Collector<T>& c) {
    stem_conv_.collect(c);
    stem_bn_.collect(c);
    for (auto& stage : stages_)
      for (auto& b : stage) b.collect(c);
    for (auto& d : dec_blocks_) d.collect(c);
    recon_conv_.collect(c);
  }

  EncodeOut encode(const TensorT<T>& x, bool train) {
    const int p = x.dim(2);
    if (p % (1 << cfg_.levels) != 0 || x.dim(3) != p)
      fail("shape_mismatch",
           name_ + ": input size " + std::to_string(p) +
               " not divisible by 2^" + std::to_string(cfg_.levels));
    EncodeOut out;
    TensorT<T> h =
        stem_relu_.forward(stem_bn_.forward(stem_conv_.forward(x), train));
    for (int s = 0; s < cfg_.levels; ++s) {
      for (auto& b : stages_[static_cast<size_t>(s)]) h = b.forward(h, train);
      if (s < cfg_.levels - 1) out.skips.push_back(h);
    }
    out.bottleneck = std::move(h);
    return out;
  }

  Output decode(const EncodeOut& enc, bool train) {
    Output out;
    TensorT<T> h = enc.bottleneck;
    for (int i = 0; i < cfg_.levels; ++i) {
      if (i > 0) {
        const TensorT<T>& skip =
            enc.skips[static_cast<size_t>(cfg_.levels - 1 - i)];
        h = nn::concat_channels<T>({&h, &skip});
      }
      h = dec_blocks_[static_cast<size_t>(i)].forward(h, train);
      const int divisor = 1 << (cfg_.levels - 1 - i);
      if (divisor >= 2 &&
          std::find(cfg_.tap_scales.begin(), cfg_.tap_scales.end(), divisor) !=
              cfg_.tap_scales.end())
        out.pyramid[divisor] = h;
    }
    out.recon = recon_sig_.forward(recon_conv_.forward(h));
    return out;
  }

  Output forward(const TensorT<T>& x, bool train) {
    return decode(encode(x, train), train);
  }

  // grad_taps may be null (pretraining) or hold gradients per scale divisor.
  void backward(const TensorT<T>& grad_recon,
                const std::map<int, TensorT<T>>* grad_taps) {
    TensorT<T> g = recon_conv_.backward(recon_sig_.backward(grad_recon));
    std::vector<TensorT<T>> skip_grads(static_cast<size_t>(cfg_.levels - 1));
    for (int i = cfg_.levels - 1; i >= 0; --i) {
      const int divisor = 1 << (cfg_.levels - 1 - i);
      if (grad_taps) {
        auto it = grad_taps->find(divisor);
        if (it != grad_taps->end()) nn::add_into(g, it->second);
      }
      g = dec_blocks_[static_cast<size_t>(i)].backward(g);
      if (i > 0) {
        const int skip_idx = cfg_.levels - 1 - i;
        auto parts = nn::split_channels(
            g, {g.dim(1) - stage_channel(skip_idx), stage_channel(skip_idx)});
        g = std::move(parts[0]);
        skip_grads[static_cast<size_t>(skip_idx)] = std::move(parts[1]);
      }
    }
    for (int s = cfg_.levels - 1; s >= 0; --s) {
      if (s < cfg_.levels - 1)
        nn::add_into(g, skip_grads[static_cast<size_t>(s)]);
      auto& stage = stages_[static_cast<size_t>(s)];
      for (int b = static_cast<int>(stage.size()) - 1; b >= 0; --b)
        g = stage[static_cast<size_t>(b)].backward(g);
    }
    stem_conv_.backward(stem_bn_.backward(stem_relu_.backward(g)));
  }

 private:
  int stage_channel(int s) const {
    return cfg_.stage_channels[static_cast<size_t>(s)];
  }

  int decoder_in_channels(int i) const {
    if (i == 0) return cfg_.stage_channels.back();
    return cfg_.decoder_channels[static_cast<size_t>(i - 1)] +
           stage_channel(cfg_.levels - 1 - i);
  }

  std::string name_;
  AutoencoderConfig cfg_;
  nn::Conv2d<T> stem_conv_;
  nn::BatchNorm2d<T> stem_bn_;
  nn::ReLU<T> stem_relu_;
  std::vector<std::vector<BottleneckBlock<T>>> stages_;
  std::vector<UpsampleBlock<T>> dec_blocks_;
  nn::Conv2d<T> recon_conv_;
  nn::Sigmoid<T> recon_sig_;
};

}  // namespace cacdn
