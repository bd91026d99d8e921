#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cacdn/core_types.hpp"
#include "cacdn/foundation.hpp"
#include "cacdn/fusion.hpp"

// CACDN assembly: three per-modality autoencoders plus the DEM branch feed
// the residual fusion stack; a small head upsamples the finest fused map back
// to full resolution and emits per-pixel change probabilities. The ablated
// model ("without S2 pre-image") is the same network with use_s2_pre=false:
// the S2 autoencoder is simply never built, so none of its parameters exist
// in the optimization set.

namespace cacdn {

struct ModelConfig {
  enum class Variant { LARGE, SMALL };
  Variant variant = Variant::SMALL;
  int p = 128;
  bool use_s2_pre = true;
  int dem_branch_channels = 64;
  double width_mult = 0.25;
  bool full_scale = false;
  AutoencoderConfig ae_s1_pre, ae_s1_post, ae_s2_pre;
  FusionConfig fusion;

  // Flood task: large variant on 256-pixel tiles.
  static ModelConfig flood(bool use_s2 = true, double width_mult = 0.25,
                           bool full_scale = false) {
    ModelConfig c;
    c.variant = Variant::LARGE;
    c.p = 256;
    c.use_s2_pre = use_s2;
    c.width_mult = width_mult;
    c.full_scale = full_scale;
    c.ae_s1_pre = AutoencoderConfig::large(2, width_mult, full_scale);
    c.ae_s1_post = AutoencoderConfig::large(2, width_mult, full_scale);
    c.ae_s2_pre = AutoencoderConfig::large(4, width_mult, full_scale);
    c.fusion = FusionConfig::large();
    return c;
  }

  // Landslide task: small variant on 128-pixel tiles.
  static ModelConfig landslide(bool use_s2 = true, double width_mult = 0.25,
                               bool full_scale = false) {
    ModelConfig c;
    c.variant = Variant::SMALL;
    c.p = 128;
    c.use_s2_pre = use_s2;
    c.width_mult = width_mult;
    c.full_scale = full_scale;
    c.ae_s1_pre = AutoencoderConfig::small(2, width_mult, full_scale);
    c.ae_s1_post = AutoencoderConfig::small(2, width_mult, full_scale);
    c.ae_s2_pre = AutoencoderConfig::small(4, width_mult, full_scale);
    c.fusion = FusionConfig::small();
    return c;
  }

  void validate() const {
    if (variant == Variant::LARGE) {
      require(p == 256, "config_error", "large variant uses p=256");
      require(fusion.variant == FusionConfig::Variant::LARGE, "config_error",
              "large variant uses the (8,4,2) fusion plan");
    } else {
      require(p == 128, "config_error", "small variant uses p=128");
      require(fusion.variant == FusionConfig::Variant::SMALL, "config_error",
              "small variant uses the (4,2) fusion plan");
    }
    require(dem_branch_channels >= 1, "config_error",
            "dem_branch_channels must be positive");
    ae_s1_pre.validate();
    ae_s1_post.validate();
    if (use_s2_pre) ae_s2_pre.validate();
    fusion.validate();
    require(ae_s1_pre.in_channels == 2 && ae_s1_post.in_channels == 2,
            "config_error", "S1 autoencoders take 2 bands");
    require(!use_s2_pre || ae_s2_pre.in_channels == 4, "config_error",
            "S2 autoencoder takes 4 bands");
    for (int d : fusion.scales) {
      ae_s1_pre.tap_channels(d);
      ae_s1_post.tap_channels(d);
      if (use_s2_pre) ae_s2_pre.tap_channels(d);
    }
  }

  const AutoencoderConfig& ae_config(Modality m) const {
    switch (m) {
      case Modality::S1_PRE: return ae_s1_pre;
      case Modality::S1_POST: return ae_s1_post;
      case Modality::S2_PRE: return ae_s2_pre;
      default: fail("config_error", "no autoencoder for this modality");
    }
  }
};

// Two blocks of (3x3 stride-2 conv -> batchnorm -> ReLU); output at p/4.
template <typename T>
class DemBranch {
 public:
  DemBranch() = default;
  DemBranch(const std::string& name, int in_c, int out_c) {
    const int mid = std::max(16, out_c / 2);
    c1_ = nn::Conv2d<T>(name + ".conv1", in_c, mid, 3, 2, 1);
    b1_ = nn::BatchNorm2d<T>(name + ".bn1", mid);
    c2_ = nn::Conv2d<T>(name + ".conv2", mid, out_c, 3, 2, 1);
    b2_ = nn::BatchNorm2d<T>(name + ".bn2", out_c);
  }

  TensorT<T> forward(const TensorT<T>& x, bool train) {
    TensorT<T> h = r1_.forward(b1_.forward(c1_.forward(x), train));
    return r2_.forward(b2_.forward(c2_.forward(h), train));
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    return c1_.backward(b1_.backward(
        r1_.backward(c2_.backward(b2_.backward(r2_.backward(gy))))));
  }

  void init_params(uint64_t seed) {
    c1_.init_params(seed);
    b1_.init_params(seed);
    c2_.init_params(seed);
    b2_.init_params(seed);
  }

  void collect(nn::Collector<T>& c) {
    c1_.collect(c);
    b1_.collect(c);
    c2_.collect(c);
    b2_.collect(c);
  }

 private:
  nn::Conv2d<T> c1_, c2_;
  nn::BatchNorm2d<T> b1_, b2_;
  nn::ReLU<T> r1_, r2_;
};

// One upsampling block from p/2 to p, a 3x3 refinement conv, then 1x1 conv +
// sigmoid to per-pixel probabilities.
template <typename T>
class ChangeHead {
 public:
  ChangeHead() = default;
  ChangeHead(const std::string& name, int in_c, int mid_c = 16)
      : up_(name + ".up", in_c, mid_c) {
    refine_ = nn::Conv2d<T>(name + ".refine", mid_c, mid_c, 3, 1, 1);
    bn_ = nn::BatchNorm2d<T>(name + ".bn", mid_c);
    out_ = nn::Conv2d<T>(name + ".out", mid_c, 1, 1, 1, 0);
  }

  TensorT<T> forward(const TensorT<T>& fused, bool train) {
    TensorT<T> h = up_.forward(fused, train);
    h = relu_.forward(bn_.forward(refine_.forward(h), train));
    return sig_.forward(out_.forward(h));
  }

  TensorT<T> backward(const TensorT<T>& gy) {
    TensorT<T> g = out_.backward(sig_.backward(gy));
    g = refine_.backward(bn_.backward(relu_.backward(g)));
    return up_.backward(g);
  }

  void init_params(uint64_t seed) {
    up_.init_params(seed);
    refine_.init_params(seed);
    bn_.init_params(seed);
    out_.init_params(seed);
  }

  void collect(nn::Collector<T>& c) {
    up_.collect(c);
    refine_.collect(c);
    bn_.collect(c);
    out_.collect(c);
  }

 private:
  UpsampleBlock<T> up_;
  nn::Conv2d<T> refine_, out_;
  nn::BatchNorm2d<T> bn_;
  nn::ReLU<T> relu_;
  nn::Sigmoid<T> sig_;
};

template <typename T>
struct ForwardOutputT {
  TensorT<T> change_prob;  // [p, p]
  std::map<Modality, TensorT<T>> reconstructions;
  std::map<Modality, FeaturePyramidT<T>> pyramids;
};
using ForwardOutput = ForwardOutputT<float>;

template <typename T>
class Network {
 public:
  struct BatchInputs {
    TensorT<T> s1_pre, s1_post, s2_pre, dem;  // s2_pre may be empty when ablated
  };
  struct BatchOutput {
    TensorT<T> change_prob;  // [N, 1, p, p]
    std::map<Modality, TensorT<T>> recons;
    std::map<Modality, FeaturePyramidT<T>> pyramids;  // filled on request
  };

  explicit Network(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    ae_s1_pre_ = std::make_unique<Autoencoder<T>>("ae_s1_pre", cfg_.ae_s1_pre);
    ae_s1_post_ =
        std::make_unique<Autoencoder<T>>("ae_s1_post", cfg_.ae_s1_post);
    if (cfg_.use_s2_pre)
      ae_s2_pre_ = std::make_unique<Autoencoder<T>>("ae_s2_pre", cfg_.ae_s2_pre);
    dem_ = DemBranch<T>("dem_branch", 4, cfg_.dem_branch_channels);
    auto taps = [&](const AutoencoderConfig& a) {
      std::map<int, int> m;
      for (int d : cfg_.fusion.scales) m[d] = a.tap_channels(d);
      return m;
    };
    std::map<int, int> s2_taps;
    if (cfg_.use_s2_pre) s2_taps = taps(cfg_.ae_s2_pre);
    fusion_ = FusionStack<T>("fusion", cfg_.fusion, taps(cfg_.ae_s1_post),
                             taps(cfg_.ae_s1_pre),
                             cfg_.use_s2_pre ? &s2_taps : nullptr,
                             cfg_.dem_branch_channels);
    head_ = ChangeHead<T>("head", cfg_.fusion.finest_channels());
  }

  const ModelConfig& config() const { return cfg_; }

  void init_params(uint64_t seed) {
    ae_s1_pre_->init_params(seed);
    ae_s1_post_->init_params(seed);
    if (ae_s2_pre_) ae_s2_pre_->init_params(seed);
    dem_.init_params(seed);
    fusion_.init_params(seed);
    head_.init_params(seed);
  }

  nn::Collector<T> collect() {
    nn::Collector<T> c;
    ae_s1_post_->collect(c);
    ae_s1_pre_->collect(c);
    if (ae_s2_pre_) ae_s2_pre_->collect(c);
    dem_.collect(c);
    fusion_.collect(c);
    head_.collect(c);
    return c;
  }

  int64_t param_count() {
    int64_t n = 0;
    for (const auto& p : collect().params) n += p.value->numel();
    return n;
  }

  BatchOutput forward(const BatchInputs& in, bool train,
                      bool want_pyramids = false) {
    check_inputs(in);
    BatchOutput out;
    auto post = ae_s1_post_->forward(in.s1_post, train);
    auto pre = ae_s1_pre_->forward(in.s1_pre, train);
    typename Autoencoder<T>::Output s2;
    if (ae_s2_pre_) s2 = ae_s2_pre_->forward(in.s2_pre, train);
    TensorT<T> dem_feat = dem_.forward(in.dem, train);
    FeaturePyramidT<T> pyr_post{std::move(post.pyramid)};
    FeaturePyramidT<T> pyr_pre{std::move(pre.pyramid)};
    FeaturePyramidT<T> pyr_s2{std::move(s2.pyramid)};
    auto fused = fusion_.forward(pyr_post, pyr_pre,
                                 ae_s2_pre_ ? &pyr_s2 : nullptr, dem_feat,
                                 train);
    out.change_prob = head_.forward(fused.fused, train);
    out.recons[Modality::S1_POST] = std::move(post.recon);
    out.recons[Modality::S1_PRE] = std::move(pre.recon);
    if (ae_s2_pre_) out.recons[Modality::S2_PRE] = std::move(s2.recon);
    if (want_pyramids) {
      out.pyramids[Modality::S1_POST] = std::move(pyr_post);
      out.pyramids[Modality::S1_PRE] = std::move(pyr_pre);
      if (ae_s2_pre_) out.pyramids[Modality::S2_PRE] = std::move(pyr_s2);
    }
    return out;
  }

  void backward(const TensorT<T>& g_prob,
                const std::map<Modality, TensorT<T>>& g_recons) {
    TensorT<T> g_fused = head_.backward(g_prob);
    auto fg = fusion_.backward(g_fused);
    ae_s1_post_->backward(g_recons.at(Modality::S1_POST), &fg.post);
    ae_s1_pre_->backward(g_recons.at(Modality::S1_PRE), &fg.pre);
    if (ae_s2_pre_)
      ae_s2_pre_->backward(g_recons.at(Modality::S2_PRE), &fg.s2);
    dem_.backward(fg.dem);
  }

  void zero_grad() {
    for (auto& p : collect().params) p.grad->fill(T(0));
  }

  // Single-sample convenience with the spec-shaped output.
  ForwardOutputT<T> forward_sample(const TileSample& sample,
                                   bool train = false) {
    require(sample.p == cfg_.p, "config_error",
            "sample patch size " + std::to_string(sample.p) +
                " does not match model p=" + std::to_string(cfg_.p));
    auto violations = validate_sample(sample);
    if (!violations.empty())
      fail("data_error", "invalid sample '" + sample.id + "': " + violations[0]);
    BatchInputs in = batch_from_samples({&sample});
    BatchOutput bo = forward(in, train, /*want_pyramids=*/true);
    ForwardOutputT<T> out;
    out.change_prob = TensorT<T>({cfg_.p, cfg_.p});
    std::copy_n(bo.change_prob.ptr(), out.change_prob.numel(),
                out.change_prob.ptr());
    for (auto& [m, r] : bo.recons)
      out.reconstructions[m] = slice_sample(r, 0);
    for (auto& [m, pyr] : bo.pyramids) {
      FeaturePyramidT<T> p;
      for (auto& [d, t] : pyr.levels) p.levels[d] = slice_sample(t, 0);
      out.pyramids[m] = std::move(p);
    }
    return out;
  }

  BatchInputs batch_from_samples(const std::vector<const TileSample*>& tiles) {
    std::vector<const Tensor*> s1p, s1q, s2, dem;
    for (const auto* t : tiles) {
      s1p.push_back(&t->s1_pre);
      s1q.push_back(&t->s1_post);
      s2.push_back(&t->s2_pre);
      dem.push_back(&t->dem);
    }
    BatchInputs in;
    in.s1_pre = stack_samples(s1p).template cast<T>();
    in.s1_post = stack_samples(s1q).template cast<T>();
    if (cfg_.use_s2_pre) in.s2_pre = stack_samples(s2).template cast<T>();
    in.dem = stack_samples(dem).template cast<T>();
    return in;
  }

  Autoencoder<T>* autoencoder(Modality m) {
    switch (m) {
      case Modality::S1_PRE: return ae_s1_pre_.get();
      case Modality::S1_POST: return ae_s1_post_.get();
      case Modality::S2_PRE: return ae_s2_pre_.get();
      default: return nullptr;
    }
  }

  FusionStack<T>& fusion() { return fusion_; }

 private:
  void check_inputs(const BatchInputs& in) const {
    const int n = in.s1_post.dim(0);
    check_shape(in.s1_post, {n, 2, cfg_.p, cfg_.p}, "s1_post");
    check_shape(in.s1_pre, {n, 2, cfg_.p, cfg_.p}, "s1_pre");
    if (cfg_.use_s2_pre)
      check_shape(in.s2_pre, {n, 4, cfg_.p, cfg_.p}, "s2_pre");
    check_shape(in.dem, {n, 4, cfg_.p, cfg_.p}, "dem");
  }

  ModelConfig cfg_;
  std::unique_ptr<Autoencoder<T>> ae_s1_pre_, ae_s1_post_, ae_s2_pre_;
  DemBranch<T> dem_;
  FusionStack<T> fusion_;
  ChangeHead<T> head_;
};

// mask = 1 where prob >= threshold
template <typename T>
std::vector<uint8_t> predict_mask(const TensorT<T>& change_prob,
                                  double threshold = 0.5) {
  require(threshold >= 0.0 && threshold <= 1.0, "config_error",
          "threshold must lie in [0,1]");
  std::vector<uint8_t> mask(static_cast<size_t>(change_prob.numel()));
  for (size_t i = 0; i < mask.size(); ++i)
    mask[i] = static_cast<double>(change_prob.data[i]) >= threshold ? 1 : 0;
  return mask;
}

}  // namespace cacdn
