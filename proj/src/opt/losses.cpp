#include "splatflow/opt/losses.hpp"

#include <array>
#include <cmath>

#include "splatflow/core/error.hpp"
#include "splatflow/opt/optimizer.hpp"

namespace splatflow::opt {

namespace {

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable zero-padded 'same' filtering of one HxW plane.
void blur(const std::vector<double>& in, std::vector<double>& out, int h, int w) {
  static const auto taps = gaussian_taps();
  constexpr int r = kSsimWindow / 2;
  std::vector<double> tmp(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w) s += taps[k + r] * in[y * w + xx];
      }
      tmp[y * w + x] = s;
    }
  }
  out.assign(in.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -r; k <= r; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) s += taps[k + r] * tmp[yy * w + x];
      }
      out[y * w + x] = s;
    }
  }
}

}  // namespace

double ssim(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* grad_a, ImageBuffer* map) {
  require_same_shape(a, b, "ssim");
  if (a.empty()) throw ShapeMismatch("ssim: empty image");
  const int h = a.height, w = a.width, nc = a.channels;
  const size_t np = a.pixel_count();
  const double inv_n = 1.0 / static_cast<double>(a.size());
  if (grad_a) *grad_a = ImageBuffer(h, w, nc);
  if (map) *map = ImageBuffer(h, w, nc);

  std::vector<double> pa(np), pb(np), paa(np), pbb(np), pab(np);
  std::vector<double> mu_a, mu_b, e_aa, e_bb, e_ab;
  std::vector<double> d_mu(np), d_aa(np), d_ab(np), g_mu, g_aa, g_ab;
  double total = 0.0;
  for (int c = 0; c < nc; ++c) {
    for (size_t p = 0; p < np; ++p) {
      pa[p] = a.data[p * nc + c];
      pb[p] = b.data[p * nc + c];
      paa[p] = pa[p] * pa[p];
      pbb[p] = pb[p] * pb[p];
      pab[p] = pa[p] * pb[p];
    }
    blur(pa, mu_a, h, w);
    blur(pb, mu_b, h, w);
    blur(paa, e_aa, h, w);
    blur(pbb, e_bb, h, w);
    blur(pab, e_ab, h, w);
    for (size_t p = 0; p < np; ++p) {
      const double ma = mu_a[p], mb = mu_b[p];
      const double va = e_aa[p] - ma * ma;
      const double vb = e_bb[p] - mb * mb;
      const double cab = e_ab[p] - ma * mb;
      const double a1 = 2.0 * ma * mb + kSsimC1;
      const double a2 = 2.0 * cab + kSsimC2;
      const double b1 = ma * ma + mb * mb + kSsimC1;
      const double b2 = va + vb + kSsimC2;
      const double s = (a1 * a2) / (b1 * b2);
      total += s;
      if (map) map->data[p * nc + c] = s;
      if (grad_a) {
        const double ds_dcab = 2.0 * a1 / (b1 * b2);
        const double ds_dva = -s / b2;
        // S as a function of (mu_a, E[a^2], E[ab]) with b's statistics fixed
        d_mu[p] = 2.0 * mb * a2 / (b1 * b2) - 2.0 * ma * s / b1 - mb * ds_dcab - 2.0 * ma * ds_dva;
        d_aa[p] = ds_dva;
        d_ab[p] = ds_dcab;
      }
    }
    if (grad_a) {
      // The window is symmetric, so the adjoint of the blur is the blur itself.
      blur(d_mu, g_mu, h, w);
      blur(d_aa, g_aa, h, w);
      blur(d_ab, g_ab, h, w);
      for (size_t p = 0; p < np; ++p) {
        grad_a->data[p * nc + c] = inv_n * (g_mu[p] + 2.0 * pa[p] * g_aa[p] + pb[p] * g_ab[p]);
      }
    }
  }
  return total * inv_n;
}

double l1_loss(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* grad_a) {
  require_same_shape(a, b, "l1_loss");
  const double inv_n = 1.0 / static_cast<double>(a.size());
  if (grad_a) *grad_a = ImageBuffer(a.height, a.width, a.channels);
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += std::abs(d);
    if (grad_a) grad_a->data[i] = d > 0 ? inv_n : (d < 0 ? -inv_n : 0.0);
  }
  return s * inv_n;
}

double mse_loss(const ImageBuffer& a, const ImageBuffer& b, ImageBuffer* grad_a) {
  require_same_shape(a, b, "mse_loss");
  const double inv_n = 1.0 / static_cast<double>(a.size());
  if (grad_a) *grad_a = ImageBuffer(a.height, a.width, a.channels);
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
    if (grad_a) grad_a->data[i] = 2.0 * d * inv_n;
  }
  return s * inv_n;
}

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  const double m = mse_loss(a, b);
  if (m <= 1e-10) return 99.0;
  return std::min(99.0, -10.0 * std::log10(m));
}

namespace {

void axpy(double alpha, const ImageBuffer& x, ImageBuffer& y) {
  for (size_t i = 0; i < y.size(); ++i) y.data[i] += alpha * x.data[i];
}

}  // namespace

double loss_gs(const ImageBuffer& render, const ImageBuffer& gt, const OptimizerConfig& cfg, ImageBuffer* grad) {
  require_same_shape(render, gt, "loss_gs");
  const double lam = cfg.ssim_weight;
  ImageBuffer g_l1, g_ssim;
  const double l1 = l1_loss(render, gt, grad ? &g_l1 : nullptr);
  double s = 1.0;
  if (lam != 0.0) s = ssim(render, gt, grad ? &g_ssim : nullptr);
  if (grad) {
    *grad = ImageBuffer(render.height, render.width, render.channels);
    axpy(1.0 - lam, g_l1, *grad);
    if (lam != 0.0) axpy(-lam, g_ssim, *grad);
  }
  return (1.0 - lam) * l1 + lam * (1.0 - s);
}

double loss_tgt(const ImageBuffer& render, const ImageBuffer& gt, const OptimizerConfig& cfg,
                const PerceptualHook& hook, ImageBuffer* grad) {
  require_same_shape(render, gt, "loss_tgt");
  const double lam = cfg.tgt_ssim_weight;
  ImageBuffer g_mse, g_ssim, g_hook;
  const double l2 = mse_loss(render, gt, grad ? &g_mse : nullptr);
  double s = 1.0;
  if (lam != 0.0) s = ssim(render, gt, grad ? &g_ssim : nullptr);
  double perceptual = 0.0;
  if (hook) perceptual = hook(render, gt, grad ? &g_hook : nullptr);
  if (grad) {
    *grad = ImageBuffer(render.height, render.width, render.channels);
    axpy(1.0 - lam, g_mse, *grad);
    if (lam != 0.0) axpy(-lam, g_ssim, *grad);
    if (hook && g_hook.same_shape(*grad)) axpy(cfg.lpips_weight, g_hook, *grad);
  }
  return (1.0 - lam) * l2 + lam * (1.0 - s) + cfg.lpips_weight * perceptual;
}

}  // namespace splatflow::opt
