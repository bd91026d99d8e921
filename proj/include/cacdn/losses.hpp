#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "cacdn/common.hpp"
#include "cacdn/tensor.hpp"

// Supervised segmentation losses (focal, dice), the soft-label reconstruction
// primitives, and the weighted total that combines them. All reductions are
// means and accumulate in double, so values are independent of tile size for
// identical per-pixel statistics and reproducible across runs.

namespace cacdn {

struct LossConfig {
  double sup_weight = 0.6;
  double selfsup_weight = 0.4;
  double beta = 1.0;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  double dice_smooth = 1.0;

  void validate() const {
    require(std::abs(sup_weight + selfsup_weight - 1.0) < 1e-9, "config_error",
            "sup_weight + selfsup_weight must equal 1");
    require(focal_gamma >= 0.0, "config_error", "focal_gamma must be >= 0");
    require(dice_smooth > 0.0, "config_error", "dice_smooth must be positive");
    require(focal_alpha >= 0.0 && focal_alpha <= 1.0, "config_error",
            "focal_alpha must lie in [0,1]");
  }
};

struct LossBreakdown {
  double l_focal = 0.0;
  double l_dice = 0.0;
  double l_ce = 0.0;
  double l_mse = 0.0;
  double total = 0.0;
};

constexpr double kProbEps = 1e-7;

template <typename T>
inline double clamp_prob(T p) {
  double v = static_cast<double>(p);
  if (v < kProbEps) return kProbEps;
  if (v > 1.0 - kProbEps) return 1.0 - kProbEps;
  return v;
}

// --- focal loss ----------------------------------------------------------------

// Mean over pixels of -alpha_t (1 - p_t)^gamma log(p_t), with
// p_t = prob for mask 1 and 1 - prob for mask 0.
template <typename T>
double focal_loss(const TensorT<T>& prob, const std::vector<uint8_t>& mask,
                  double gamma, double alpha) {
  require(static_cast<size_t>(prob.numel()) == mask.size(), "shape_mismatch",
          "focal_loss: prob and mask sizes disagree");
  double acc = 0.0;
  for (size_t i = 0; i < mask.size(); ++i) {
    const double p = clamp_prob(prob.data[i]);
    const double pt = mask[i] ? p : 1.0 - p;
    const double at = mask[i] ? alpha : 1.0 - alpha;
    acc += -at * std::pow(1.0 - pt, gamma) * std::log(pt);
  }
  return acc / static_cast<double>(mask.size());
}

// d(focal)/d(prob), scaled by grad_scale and added into grad.
template <typename T>
double focal_loss_grad(const TensorT<T>& prob, const std::vector<uint8_t>& mask,
                       double gamma, double alpha, TensorT<T>& grad,
                       double grad_scale) {
  require(static_cast<size_t>(prob.numel()) == mask.size(), "shape_mismatch",
          "focal_loss: prob and mask sizes disagree");
  const double inv_m = 1.0 / static_cast<double>(mask.size());
  double acc = 0.0;
  for (size_t i = 0; i < mask.size(); ++i) {
    const double p = clamp_prob(prob.data[i]);
    const double pt = mask[i] ? p : 1.0 - p;
    const double at = mask[i] ? alpha : 1.0 - alpha;
    const double one_m = 1.0 - pt;
    acc += -at * std::pow(one_m, gamma) * std::log(pt);
    // d/d(pt) of -at (1-pt)^g log pt, then d(pt)/d(prob) = +/-1
    double d_pt = at * (gamma * std::pow(one_m, gamma - 1.0) * std::log(pt) -
                        std::pow(one_m, gamma) / pt);
    if (!mask[i]) d_pt = -d_pt;
    grad.data[i] += static_cast<T>(d_pt * inv_m * grad_scale);
  }
  return acc * inv_m;
}

// --- dice loss -----------------------------------------------------------------

// Soft dice over all pixels: 1 - (2*sum(p*m) + s) / (sum(p) + sum(m) + s).
template <typename T>
double dice_loss(const TensorT<T>& prob, const std::vector<uint8_t>& mask,
                 double smooth) {
  require(static_cast<size_t>(prob.numel()) == mask.size(), "shape_mismatch",
          "dice_loss: prob and mask sizes disagree");
  double inter = 0.0, sum_p = 0.0, sum_m = 0.0;
  for (size_t i = 0; i < mask.size(); ++i) {
    const double p = static_cast<double>(prob.data[i]);
    sum_p += p;
    sum_m += mask[i];
    if (mask[i]) inter += p;
  }
  return 1.0 - (2.0 * inter + smooth) / (sum_p + sum_m + smooth);
}

template <typename T>
double dice_loss_grad(const TensorT<T>& prob, const std::vector<uint8_t>& mask,
                      double smooth, TensorT<T>& grad, double grad_scale) {
  require(static_cast<size_t>(prob.numel()) == mask.size(), "shape_mismatch",
          "dice_loss: prob and mask sizes disagree");
  double inter = 0.0, sum_p = 0.0, sum_m = 0.0;
  for (size_t i = 0; i < mask.size(); ++i) {
    const double p = static_cast<double>(prob.data[i]);
    sum_p += p;
    sum_m += mask[i];
    if (mask[i]) inter += p;
  }
  const double denom = sum_p + sum_m + smooth;
  const double numer = 2.0 * inter + smooth;
  for (size_t i = 0; i < mask.size(); ++i) {
    const double d = -(2.0 * (mask[i] ? 1.0 : 0.0) * denom - numer) /
                     (denom * denom);
    grad.data[i] += static_cast<T>(d * grad_scale);
  }
  return 1.0 - numer / denom;
}

// --- reconstruction primitives ---------------------------------------------------

// Per-pixel binary cross-entropy with [0,1] targets treated as soft labels.
template <typename T>
double soft_bce_mean(const TensorT<T>& recon, const TensorT<T>& target) {
  require(recon.same_shape(target), "shape_mismatch",
          "bce: recon and target shapes disagree");
  double acc = 0.0;
  for (size_t i = 0; i < recon.data.size(); ++i) {
    const double r = clamp_prob(recon.data[i]);
    const double t = static_cast<double>(target.data[i]);
    acc += -(t * std::log(r) + (1.0 - t) * std::log(1.0 - r));
  }
  return acc / static_cast<double>(recon.numel());
}

template <typename T>
double soft_bce_mean_grad(const TensorT<T>& recon, const TensorT<T>& target,
                          TensorT<T>& grad, double grad_scale) {
  require(recon.same_shape(target), "shape_mismatch",
          "bce: recon and target shapes disagree");
  const double inv_m = 1.0 / static_cast<double>(recon.numel());
  double acc = 0.0;
  for (size_t i = 0; i < recon.data.size(); ++i) {
    const double r = clamp_prob(recon.data[i]);
    const double t = static_cast<double>(target.data[i]);
    acc += -(t * std::log(r) + (1.0 - t) * std::log(1.0 - r));
    grad.data[i] +=
        static_cast<T>((-t / r + (1.0 - t) / (1.0 - r)) * inv_m * grad_scale);
  }
  return acc * inv_m;
}

// Excess of the soft BCE over its floor H(target): zero iff recon == target.
// Same gradient as soft_bce_mean; used as the pretraining progress metric.
template <typename T>
double soft_bce_excess_mean(const TensorT<T>& recon, const TensorT<T>& target) {
  require(recon.same_shape(target), "shape_mismatch",
          "bce: recon and target shapes disagree");
  double acc = 0.0;
  for (size_t i = 0; i < recon.data.size(); ++i) {
    const double r = clamp_prob(recon.data[i]);
    const double t = static_cast<double>(target.data[i]);
    double v = -(t * std::log(r) + (1.0 - t) * std::log(1.0 - r));
    if (t > 0.0) v += t * std::log(t);
    if (t < 1.0) v += (1.0 - t) * std::log(1.0 - t);
    acc += v;
  }
  return acc / static_cast<double>(recon.numel());
}

template <typename T>
double mse_mean(const TensorT<T>& recon, const TensorT<T>& target) {
  require(recon.same_shape(target), "shape_mismatch",
          "mse: recon and target shapes disagree");
  double acc = 0.0;
  for (size_t i = 0; i < recon.data.size(); ++i) {
    const double d =
        static_cast<double>(recon.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
  }
  return acc / static_cast<double>(recon.numel());
}

template <typename T>
double mse_mean_grad(const TensorT<T>& recon, const TensorT<T>& target,
                     TensorT<T>& grad, double grad_scale) {
  require(recon.same_shape(target), "shape_mismatch",
          "mse: recon and target shapes disagree");
  const double inv_m = 1.0 / static_cast<double>(recon.numel());
  double acc = 0.0;
  for (size_t i = 0; i < recon.data.size(); ++i) {
    const double d =
        static_cast<double>(recon.data[i]) - static_cast<double>(target.data[i]);
    acc += d * d;
    grad.data[i] += static_cast<T>(2.0 * d * inv_m * grad_scale);
  }
  return acc * inv_m;
}

// --- total loss ------------------------------------------------------------------

// total = sup_weight * (l_focal + l_dice)
//       + selfsup_weight * (l_ce + beta * l_mse)
// where l_ce / l_mse are averaged over the active reconstruction branches, so
// disabling a branch does not rescale the self-supervised term.
template <typename T>
struct ReconPair {
  const TensorT<T>* recon;
  const TensorT<T>* target;
};

template <typename T>
LossBreakdown total_loss(const TensorT<T>& change_prob,
                         const std::vector<uint8_t>& mask,
                         const std::vector<ReconPair<T>>& recons,
                         const LossConfig& cfg) {
  cfg.validate();
  require(!mask.empty(), "data_error", "total_loss requires a mask");
  LossBreakdown b;
  b.l_focal = focal_loss(change_prob, mask, cfg.focal_gamma, cfg.focal_alpha);
  b.l_dice = dice_loss(change_prob, mask, cfg.dice_smooth);
  for (const auto& rp : recons) {
    b.l_ce += soft_bce_mean(*rp.recon, *rp.target);
    b.l_mse += mse_mean(*rp.recon, *rp.target);
  }
  if (!recons.empty()) {
    b.l_ce /= static_cast<double>(recons.size());
    b.l_mse /= static_cast<double>(recons.size());
  }
  b.total = cfg.sup_weight * (b.l_focal + b.l_dice) +
            cfg.selfsup_weight * (b.l_ce + cfg.beta * b.l_mse);
  return b;
}

// Gradient flavour: fills d(total)/d(prob) and d(total)/d(recon_i), each
// scaled by grad_scale (1/batch for batch means).
template <typename T>
LossBreakdown total_loss_grad(const TensorT<T>& change_prob,
                              const std::vector<uint8_t>& mask,
                              const std::vector<ReconPair<T>>& recons,
                              const LossConfig& cfg, TensorT<T>& grad_prob,
                              std::vector<TensorT<T>*>& grad_recons,
                              double grad_scale) {
  cfg.validate();
  require(!mask.empty(), "data_error", "total_loss requires a mask");
  LossBreakdown b;
  const double ws = cfg.sup_weight * grad_scale;
  b.l_focal = focal_loss_grad(change_prob, mask, cfg.focal_gamma,
                              cfg.focal_alpha, grad_prob, ws);
  b.l_dice =
      dice_loss_grad(change_prob, mask, cfg.dice_smooth, grad_prob, ws);
  if (!recons.empty()) {
    const double wr =
        cfg.selfsup_weight * grad_scale / static_cast<double>(recons.size());
    for (size_t i = 0; i < recons.size(); ++i) {
      b.l_ce += soft_bce_mean_grad(*recons[i].recon, *recons[i].target,
                                   *grad_recons[i], wr);
      b.l_mse += mse_mean_grad(*recons[i].recon, *recons[i].target,
                               *grad_recons[i], wr * cfg.beta);
    }
    b.l_ce /= static_cast<double>(recons.size());
    b.l_mse /= static_cast<double>(recons.size());
  }
  b.total = cfg.sup_weight * (b.l_focal + b.l_dice) +
            cfg.selfsup_weight * (b.l_ce + cfg.beta * b.l_mse);
  return b;
}

}  // namespace cacdn
