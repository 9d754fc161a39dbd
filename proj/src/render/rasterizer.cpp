#include "splatflow/render/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dual.hpp"
#include "splatflow/core/error.hpp"
#include "splatflow/core/parallel.hpp"

namespace splatflow::render {

namespace {

using detail::Dual3;

struct Footprint {
  Projected2DGaussian proj;
  // Inclusive pixel bounding box of the region where the weight can reach 1/255.
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

/// Projection, sorting and tile binning shared by the forward and backward passes.
struct Prepared {
  std::vector<Footprint> footprints;     // indexed by primitive
  std::vector<char> valid;               // primitive survived culling
  std::vector<std::vector<int>> tiles;   // per tile, primitive indices in depth order
  int tiles_x = 0, tiles_y = 0, tile_size = 16;
};

Prepared prepare(const GaussianScene& scene, const CameraView& cam, int tile_size) {
  if (tile_size < 1) throw InvalidArgument("tile_size must be >= 1");
  Prepared prep;
  prep.tile_size = tile_size;
  const size_t k = scene.size();
  prep.footprints.resize(k);
  prep.valid.assign(k, 0);
  std::vector<int> order;
  order.reserve(k);
  for (size_t i = 0; i < k; ++i) {
    auto proj = project_gaussian(scene.primitives[i], scene.sh_degree, cam, static_cast<int>(i));
    if (!proj) continue;
    Footprint& fp = prep.footprints[i];
    fp.proj = *proj;
    prep.valid[i] = 1;
    const double a = proj->opacity;
    if (a * 255.0 <= 1.0) continue;  // can never reach the skip threshold
    // w >= 1/255 requires mahalanobis^2 <= 2 ln(255 a); the ellipse's axis extents bound the box.
    const double m = std::sqrt(2.0 * std::log(255.0 * a));
    const double ex = m * std::sqrt(proj->cov2d(0, 0)) + 1e-6;
    const double ey = m * std::sqrt(proj->cov2d(1, 1)) + 1e-6;
    fp.x0 = std::max(0, static_cast<int>(std::ceil(proj->mean2d.x() - ex)));
    fp.x1 = std::min(cam.width - 1, static_cast<int>(std::floor(proj->mean2d.x() + ex)));
    fp.y0 = std::max(0, static_cast<int>(std::ceil(proj->mean2d.y() - ey)));
    fp.y1 = std::min(cam.height - 1, static_cast<int>(std::floor(proj->mean2d.y() + ey)));
    if (fp.x0 > fp.x1 || fp.y0 > fp.y1) continue;
    order.push_back(static_cast<int>(i));
  }
  std::stable_sort(order.begin(), order.end(), [&](int lhs, int rhs) {
    const double dl = prep.footprints[lhs].proj.depth, dr = prep.footprints[rhs].proj.depth;
    if (dl != dr) return dl < dr;
    return lhs < rhs;
  });
  prep.tiles_x = (cam.width + tile_size - 1) / tile_size;
  prep.tiles_y = (cam.height + tile_size - 1) / tile_size;
  prep.tiles.resize(static_cast<size_t>(prep.tiles_x) * prep.tiles_y);
  for (int idx : order) {
    const Footprint& fp = prep.footprints[idx];
    for (int ty = fp.y0 / tile_size; ty <= fp.y1 / tile_size; ++ty) {
      for (int tx = fp.x0 / tile_size; tx <= fp.x1 / tile_size; ++tx) {
        prep.tiles[static_cast<size_t>(ty) * prep.tiles_x + tx].push_back(idx);
      }
    }
  }
  return prep;
}

inline double kernel_power(const Projected2DGaussian& p, double dx, double dy) {
  return -0.5 * (p.conic[0] * dx * dx + 2.0 * p.conic[1] * dx * dy + p.conic[2] * dy * dy);
}

void check_camera(const CameraView& cam) {
  if (cam.width <= 0 || cam.height <= 0) throw InvalidArgument("camera has no image size");
}

}  // namespace

std::optional<Projected2DGaussian> project_gaussian(const GaussianPrimitive& g, int sh_degree, const CameraView& cam,
                                                    int index) {
  const Vec3 mu = g.mean();
  const Vec3 pc = cam.world_to_camera(mu);
  if (pc.z() <= kNearPlane) return std::nullopt;
  const Mat3& K = cam.intrinsics;
  const double fx = K(0, 0), fy = K(1, 1), cx = K(0, 2), cy = K(1, 2);
  const double iz = 1.0 / pc.z();

  Projected2DGaussian out;
  out.source_index = index;
  out.depth = pc.z();
  out.mean2d = {fx * pc.x() * iz + cx, fy * pc.y() * iz + cy};

  Eigen::Matrix<double, 2, 3> J;
  J << fx * iz, 0.0, -fx * pc.x() * iz * iz, 0.0, fy * iz, -fy * pc.y() * iz * iz;
  const Eigen::Matrix<double, 2, 3> M = J * cam.rotation.transpose();
  const Mat3 sigma = covariance_from_params(Vec3(g.log_scale[0], g.log_scale[1], g.log_scale[2]), g.quat());
  Mat2 cov = M * sigma * M.transpose();
  cov(0, 1) = cov(1, 0) = 0.5 * (cov(0, 1) + cov(1, 0));
  cov += kLowPass * Mat2::Identity();
  out.cov2d = cov;

  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(0, 1);
  out.conic = {cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det};

  // 3σ footprint against image bounds (pixel extents [-0.5, size - 0.5]).
  const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
  const double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double r = 3.0 * std::sqrt(lambda_max);
  if (out.mean2d.x() + r < -0.5 || out.mean2d.x() - r > cam.width - 0.5 || out.mean2d.y() + r < -0.5 ||
      out.mean2d.y() - r > cam.height - 0.5) {
    return std::nullopt;
  }

  out.opacity = g.opacity();
  const Vec3 to_mu = mu - cam.center();
  out.view_dir = to_mu.normalized();
  out.rgb_raw = evaluate_sh(g.sh, sh_degree, out.view_dir);
  out.rgb = out.rgb_raw.cwiseMax(0.0);
  return out;
}

RenderOutput rasterize(const GaussianScene& scene, const CameraView& cam, int tile_size) {
  RenderSettings s;
  s.tile_size = tile_size;
  return rasterize(scene, cam, s);
}

RenderOutput rasterize(const GaussianScene& scene, const CameraView& cam, const RenderSettings& settings) {
  check_camera(cam);
  const Prepared prep = prepare(scene, cam, settings.tile_size);
  RenderOutput out;
  out.color = ImageBuffer(cam.height, cam.width, 3);
  out.alpha = ImageBuffer(cam.height, cam.width, 1);
  out.depth = ImageBuffer(cam.height, cam.width, 1);
  out.visible_count = static_cast<int>(std::count(prep.valid.begin(), prep.valid.end(), 1));

  const size_t n_tiles = prep.tiles.size();
  const int workers = settings.workers > 0 ? settings.workers : worker_count();
  parallel_for(n_tiles, workers, [&](int, size_t tb, size_t te) {
    for (size_t t = tb; t < te; ++t) {
      const int tx = static_cast<int>(t % prep.tiles_x), ty = static_cast<int>(t / prep.tiles_x);
      const auto& list = prep.tiles[t];
      const int px1 = std::min(cam.width, (tx + 1) * prep.tile_size);
      const int py1 = std::min(cam.height, (ty + 1) * prep.tile_size);
      for (int py = ty * prep.tile_size; py < py1; ++py) {
        for (int px = tx * prep.tile_size; px < px1; ++px) {
          double T = 1.0;
          Vec3 c = Vec3::Zero();
          double d = 0.0;
          for (int idx : list) {
            const Footprint& fp = prep.footprints[idx];
            if (px < fp.x0 || px > fp.x1 || py < fp.y0 || py > fp.y1) continue;
            const auto& p = fp.proj;
            const double power = kernel_power(p, px - p.mean2d.x(), py - p.mean2d.y());
            if (power > 0.0) continue;
            const double w = std::min(kMaxWeight, p.opacity * std::exp(power));
            if (w < kMinWeight) continue;
            c += p.rgb * (w * T);
            d += p.depth * w * T;
            T *= (1.0 - w);
            if (T < kMinTransmittance) break;
          }
          const double a = 1.0 - T;
          for (int ch = 0; ch < 3; ++ch) out.color.at(py, px, ch) = c[ch] + T * settings.background[ch];
          out.alpha.at(py, px) = a;
          out.depth.at(py, px) = a > 0.0 ? d / a : 0.0;
        }
      }
    }
  });
  return out;
}

void SceneGradients::resize(size_t k, int sh_coeffs) {
  position.assign(3 * k, 0.0);
  log_scale.assign(3 * k, 0.0);
  rotation.assign(4 * k, 0.0);
  opacity_logit.assign(k, 0.0);
  sh.assign(k * sh_coeffs * 3, 0.0);
  mean2d_grad_norm.assign(k, 0.0);
  abs_grad.assign(k, 0.0);
  radius.assign(k, 0.0);
  visible.assign(k, 0);
}

void SceneGradients::set_zero() {
  for (auto* v : {&position, &log_scale, &rotation, &opacity_logit, &sh, &mean2d_grad_norm, &abs_grad, &radius}) {
    std::fill(v->begin(), v->end(), 0.0);
  }
  std::fill(visible.begin(), visible.end(), 0);
}

namespace {

// Per-primitive screen-space gradient accumulator layout.
enum Slot : int { kMx, kMy, kCa, kCb, kCc, kR, kG, kB, kOpa, kAbsX, kAbsY, kSlots };

struct Contribution {
  int idx;
  double g;      // kernel value
  double w;      // weight after clamping
  bool clamped;  // weight hit the 0.999 clamp
  double dx, dy;
};

}  // namespace

SceneGradients rasterize_backward(const GaussianScene& scene, const CameraView& cam, const ImageBuffer& upstream,
                                  const RenderSettings& settings) {
  check_camera(cam);
  if (upstream.height != cam.height || upstream.width != cam.width || upstream.channels != 3) {
    throw ShapeMismatch("rasterize_backward: upstream gradient must be HxWx3");
  }
  scene.validate();
  const size_t k = scene.size();
  const int n_coeffs = sh_coeff_count(scene.sh_degree);
  const Prepared prep = prepare(scene, cam, settings.tile_size);

  const size_t n_tiles = prep.tiles.size();
  const int workers = std::max(1, std::min<int>(settings.workers > 0 ? settings.workers : worker_count(),
                                                static_cast<int>(std::max<size_t>(n_tiles, 1))));
  std::vector<std::vector<double>> acc(workers);

  parallel_for(n_tiles, workers, [&](int worker, size_t tb, size_t te) {
    auto& buf = acc[worker];
    buf.assign(k * kSlots, 0.0);
    std::vector<Contribution> contribs;
    for (size_t t = tb; t < te; ++t) {
      const int tx = static_cast<int>(t % prep.tiles_x), ty = static_cast<int>(t / prep.tiles_x);
      const auto& list = prep.tiles[t];
      const int px1 = std::min(cam.width, (tx + 1) * prep.tile_size);
      const int py1 = std::min(cam.height, (ty + 1) * prep.tile_size);
      for (int py = ty * prep.tile_size; py < py1; ++py) {
        for (int px = tx * prep.tile_size; px < px1; ++px) {
          // Recompute the front-to-back list of this pixel.
          contribs.clear();
          double T = 1.0;
          for (int idx : list) {
            const Footprint& fp = prep.footprints[idx];
            if (px < fp.x0 || px > fp.x1 || py < fp.y0 || py > fp.y1) continue;
            const auto& p = fp.proj;
            const double dx = px - p.mean2d.x(), dy = py - p.mean2d.y();
            const double power = kernel_power(p, dx, dy);
            if (power > 0.0) continue;
            const double g = std::exp(power);
            const double raw = p.opacity * g;
            const double w = std::min(kMaxWeight, raw);
            if (w < kMinWeight) continue;
            contribs.push_back({idx, g, w, raw > kMaxWeight, dx, dy});
            T *= (1.0 - w);
            if (T < kMinTransmittance) break;
          }
          if (contribs.empty()) continue;
          const Vec3 dC(upstream.at(py, px, 0), upstream.at(py, px, 1), upstream.at(py, px, 2));
          // Back to front: `behind` is the colour composited behind the current
          // primitive, normalised by its own transmittance.
          Vec3 behind = settings.background;
          double T_cur = T;
          for (auto it = contribs.rbegin(); it != contribs.rend(); ++it) {
            const auto& p = prep.footprints[it->idx].proj;
            T_cur /= (1.0 - it->w);  // transmittance in front of this primitive
            double* slot = &buf[static_cast<size_t>(it->idx) * kSlots];
            const double wt = it->w * T_cur;
            slot[kR] += wt * dC[0];
            slot[kG] += wt * dC[1];
            slot[kB] += wt * dC[2];
            const double dL_dw = T_cur * (p.rgb - behind).dot(dC);
            behind = it->w * p.rgb + (1.0 - it->w) * behind;
            if (it->clamped) continue;
            slot[kOpa] += dL_dw * it->g;
            const double dL_dg = dL_dw * p.opacity;
            const double gg = dL_dg * it->g;  // dL/dpower
            // power = -0.5 (a dx² + 2 b dx dy + c dy²), d = pixel - mean
            const double gmx = gg * (p.conic[0] * it->dx + p.conic[1] * it->dy);
            const double gmy = gg * (p.conic[1] * it->dx + p.conic[2] * it->dy);
            slot[kMx] += gmx;
            slot[kMy] += gmy;
            slot[kAbsX] += std::abs(gmx);
            slot[kAbsY] += std::abs(gmy);
            slot[kCa] += -0.5 * gg * it->dx * it->dx;
            slot[kCb] += -gg * it->dx * it->dy;
            slot[kCc] += -0.5 * gg * it->dy * it->dy;
          }
        }
      }
    }
  });

  std::vector<double> screen(k * kSlots, 0.0);
  for (const auto& buf : acc) {
    if (buf.empty()) continue;
    for (size_t i = 0; i < screen.size(); ++i) screen[i] += buf[i];
  }

  SceneGradients grads;
  grads.resize(k, n_coeffs);
  const Mat3 W = cam.rotation.transpose();
  const Mat3& K = cam.intrinsics;
  const double fx = K(0, 0), fy = K(1, 1);

  for (size_t i = 0; i < k; ++i) {
    if (!prep.valid[i]) continue;
    const auto& p = prep.footprints[i].proj;
    const auto& prim = scene.primitives[i];
    grads.visible[i] = 1;
    {
      const Mat2& cv = p.cov2d;
      const double mid = 0.5 * (cv(0, 0) + cv(1, 1));
      const double det = cv.determinant();
      grads.radius[i] = 3.0 * std::sqrt(mid + std::sqrt(std::max(0.0, mid * mid - det)));
    }
    const double* s = &screen[i * kSlots];
    const Vec2 g_mean(s[kMx], s[kMy]);
    grads.mean2d_grad_norm[i] = g_mean.norm();
    grads.abs_grad[i] = std::hypot(s[kAbsX], s[kAbsY]);

    // Colour -> SH coefficients and view direction.
    Vec3 g_rgb(s[kR], s[kG], s[kB]);
    for (int c = 0; c < 3; ++c) {
      if (p.rgb_raw[c] < 0.0) g_rgb[c] = 0.0;
    }
    Dual3 basis[16];
    sh_basis(scene.sh_degree, Dual3(p.view_dir.x(), 0), Dual3(p.view_dir.y(), 1), Dual3(p.view_dir.z(), 2), basis);
    Vec3 g_dir = Vec3::Zero();
    for (int b = 0; b < n_coeffs; ++b) {
      double coeff_dot = 0.0;
      for (int c = 0; c < 3; ++c) {
        grads.sh[(i * n_coeffs + b) * 3 + c] = basis[b].v * g_rgb[c];
        coeff_dot += prim.sh[b * 3 + c] * g_rgb[c];
      }
      for (int a = 0; a < 3; ++a) g_dir[a] += basis[b].d[a] * coeff_dot;
    }

    // Opacity.
    grads.opacity_logit[i] = s[kOpa] * p.opacity * (1.0 - p.opacity);

    // Conic -> screen covariance.
    const Mat2 conic_m = (Mat2() << p.conic[0], p.conic[1], p.conic[1], p.conic[2]).finished();
    const Mat2 g_conic = (Mat2() << s[kCa], 0.5 * s[kCb], 0.5 * s[kCb], s[kCc]).finished();
    const Mat2 g_cov2d = -conic_m * g_conic * conic_m;

    // Screen covariance -> world covariance and projection Jacobian.
    const Vec3 mu = prim.mean();
    const Vec3 pc = cam.world_to_camera(mu);
    const double iz = 1.0 / pc.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Eigen::Matrix<double, 2, 3> J;
    J << fx * iz, 0.0, -fx * pc.x() * iz2, 0.0, fy * iz, -fy * pc.y() * iz2;
    const Eigen::Matrix<double, 2, 3> M = J * W;
    const Vec3 log_s(prim.log_scale[0], prim.log_scale[1], prim.log_scale[2]);
    const Eigen::Vector4d q = prim.quat();
    const Mat3 U = quat_to_rotation(q);
    const Vec3 s2 = (2.0 * log_s.array()).exp();
    const Mat3 sigma = U * s2.asDiagonal() * U.transpose();

    const Mat3 g_sigma = M.transpose() * g_cov2d * M;
    const Eigen::Matrix<double, 2, 3> g_M = 2.0 * g_cov2d * M * sigma;
    const Eigen::Matrix<double, 2, 3> g_J = g_M * W.transpose();

    Vec3 g_pc = Vec3::Zero();
    // mean2d = (fx x/z + cx, fy y/z + cy)
    g_pc.x() += g_mean.x() * fx * iz;
    g_pc.y() += g_mean.y() * fy * iz;
    g_pc.z() += -g_mean.x() * fx * pc.x() * iz2 - g_mean.y() * fy * pc.y() * iz2;
    // J entries
    g_pc.x() += g_J(0, 2) * (-fx * iz2);
    g_pc.y() += g_J(1, 2) * (-fy * iz2);
    g_pc.z() += g_J(0, 0) * (-fx * iz2) + g_J(0, 2) * (2.0 * fx * pc.x() * iz3) + g_J(1, 1) * (-fy * iz2) +
                g_J(1, 2) * (2.0 * fy * pc.y() * iz3);

    Vec3 g_mu = cam.rotation * g_pc;
    // View direction dependence of the SH colour.
    const Vec3 to_mu = mu - cam.center();
    const double dist = to_mu.norm();
    g_mu += (g_dir - p.view_dir * p.view_dir.dot(g_dir)) / dist;
    for (int a = 0; a < 3; ++a) grads.position[3 * i + a] = g_mu[a];

    // Σ = U diag(s²) Uᵀ
    const Mat3 ut_g_u = U.transpose() * g_sigma * U;
    for (int a = 0; a < 3; ++a) grads.log_scale[3 * i + a] = 2.0 * s2[a] * ut_g_u(a, a);
    const Mat3 g_U = 2.0 * g_sigma * U * s2.asDiagonal();

    const double qn = q.norm();
    const Eigen::Vector4d qh = q / qn;
    const double w = qh[0], x = qh[1], y = qh[2], z = qh[3];
    Mat3 dRw, dRx, dRy, dRz;
    dRw << 0, -z, y, z, 0, -x, -y, x, 0;
    dRx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    dRy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    dRz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    const Eigen::Vector4d g_qh(2.0 * (g_U.cwiseProduct(dRw)).sum(), 2.0 * (g_U.cwiseProduct(dRx)).sum(),
                               2.0 * (g_U.cwiseProduct(dRy)).sum(), 2.0 * (g_U.cwiseProduct(dRz)).sum());
    const Eigen::Vector4d g_q = (g_qh - qh * qh.dot(g_qh)) / qn;
    for (int a = 0; a < 4; ++a) grads.rotation[4 * i + a] = g_q[a];
  }
  return grads;
}

}  // namespace splatflow::render
