#pragma once

#include <array>
#include <vector>

#include "splatflow/core/camera.hpp"

namespace splatflow {

constexpr int kMaxShDegree = 3;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One anisotropic 3D Gaussian.
///
/// Stored in float32 (the on-disk precision) so that saving and reloading is
/// lossless; all arithmetic on it is carried out in double.
struct GaussianPrimitive {
  std::array<float, 3> position{};
  std::array<float, 3> log_scale{};
  std::array<float, 4> rotation{1.0f, 0.0f, 0.0f, 0.0f};  // (w, x, y, z), normalised at use
  float opacity_logit = 0.0f;
  std::vector<float> sh;  // sh_coeff_count(degree) * 3, laid out [coeff][channel]

  Vec3 mean() const { return {position[0], position[1], position[2]}; }
  Vec3 scale() const;
  double opacity() const;
  Eigen::Vector4d quat() const { return {rotation[0], rotation[1], rotation[2], rotation[3]}; }

  bool operator==(const GaussianPrimitive&) const = default;
};

struct GaussianScene {
  std::vector<GaussianPrimitive> primitives;
  int sh_degree = 0;
  double scene_scale = 1.0;  // metres per scene unit

  size_t size() const { return primitives.size(); }
  bool operator==(const GaussianScene&) const = default;

  /// Throws InvalidArgument if any primitive's SH size disagrees with sh_degree.
  void validate() const;
};

double sigmoid(double x);
double logit(double p);

/// Rotation matrix of the normalised quaternion (w, x, y, z).
/// Throws DegenerateQuaternion when ||q|| <= 1e-12.
Mat3 quat_to_rotation(const Eigen::Vector4d& q);

/// Σ = U diag(exp(log_scale))² Uᵀ with U the rotation of `quat`.
Mat3 covariance_from_params(const Vec3& log_scale, const Eigen::Vector4d& quat);

/// Real spherical-harmonic basis up to degree 3 in the graphics ordering
/// (band l, m = -l..l) with the Condon-Shortley phase folded into the
/// constants, i.e. the table used by the reference Gaussian-splatting code:
/// Y00 = 0.28209479, Y1m = 0.48860251 * (-y, z, -x), ...
/// Templated so the renderer can differentiate through it with dual numbers.
template <typename T>
void sh_basis(int degree, const T& x, const T& y, const T& z, T* out);

/// Evaluates SH colour for `sh` ([coeff][channel]) at a unit direction.
/// No clamping and no offset: degree 0 with coefficient c yields c * Y00.
Vec3 evaluate_sh(std::span<const float> sh, int degree, const Vec3& view_dir);

/// Degree-0 coefficient that reproduces `rgb` exactly.
double rgb_to_sh0(double rgb);

namespace sh_const {
inline constexpr double kC0 = 0.28209479177387814;
inline constexpr double kC1 = 0.4886025119029199;
inline constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                  -1.0925484305920792, 0.5462742152960396};
inline constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                  0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                  -0.5900435899266435};
}  // namespace sh_const

template <typename T>
void sh_basis(int degree, const T& x, const T& y, const T& z, T* out) {
  using namespace sh_const;
  out[0] = T(kC0);
  if (degree < 1) return;
  out[1] = -kC1 * y;
  out[2] = kC1 * z;
  out[3] = -kC1 * x;
  if (degree < 2) return;
  const T xx = x * x, yy = y * y, zz = z * z;
  const T xy = x * y, yz = y * z, xz = x * z;
  out[4] = kC2[0] * xy;
  out[5] = kC2[1] * yz;
  out[6] = kC2[2] * (2.0 * zz - xx - yy);
  out[7] = kC2[3] * xz;
  out[8] = kC2[4] * (xx - yy);
  if (degree < 3) return;
  out[9] = kC3[0] * y * (3.0 * xx - yy);
  out[10] = kC3[1] * xy * z;
  out[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  out[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  out[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  out[14] = kC3[5] * z * (xx - yy);
  out[15] = kC3[6] * x * (xx - 3.0 * yy);
}

}  // namespace splatflow
