#pragma once

#include <functional>

#include "splatflow/core/image.hpp"

namespace splatflow::opt {

struct OptimizerConfig;

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean structural similarity over all pixels and channels. Local statistics
/// use an 11-tap Gaussian window (σ = 1.5) with zero padding at the borders.
/// When `grad_a` is non-null it receives dSSIM/da; `map` receives the
/// per-pixel, per-channel values that are averaged.
double ssim(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* grad_a = nullptr, ImageBuffer* map = nullptr);

double l1_loss(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* grad_a = nullptr);
double mse_loss(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* grad_a = nullptr);

/// 10 log10(1 / MSE), capped at 99 dB for identical images.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

/// Optional perceptual term: returns a scalar and, when `grad` is non-null,
/// writes its gradient w.r.t. the first argument.
using PerceptualHook = std::function<double(const ImageBuffer& render, const ImageBuffer& gt, ImageBuffer* grad)>;

/// (1 - λ) L1 + λ (1 - SSIM) with λ = cfg.ssim_weight.
double loss_gs(const ImageBuffer& render, const ImageBuffer& gt, const OptimizerConfig& cfg,
               ImageBuffer* grad = nullptr);

/// (1 - λ') MSE + λ' (1 - SSIM) + λ_p hook, with λ' = cfg.tgt_ssim_weight and
/// λ_p = cfg.lpips_weight. Without a hook the perceptual term is zero.
double loss_tgt(const ImageBuffer& render, const ImageBuffer& gt, const OptimizerConfig& cfg,
                const PerceptualHook& hook = {}, ImageBuffer* grad = nullptr);

}  // namespace splatflow::opt
