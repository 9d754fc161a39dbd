#include "splatflow/core/gaussian.hpp"

#include <cmath>
#include <string>

#include "splatflow/core/error.hpp"

namespace splatflow {

Vec3 GaussianPrimitive::scale() const {
  return {std::exp(double(log_scale[0])), std::exp(double(log_scale[1])), std::exp(double(log_scale[2]))};
}

double GaussianPrimitive::opacity() const { return sigmoid(opacity_logit); }

void GaussianScene::validate() const {
  if (sh_degree < 0 || sh_degree > kMaxShDegree) {
    throw UnsupportedDegree("sh degree " + std::to_string(sh_degree));
  }
  const size_t expected = static_cast<size_t>(sh_coeff_count(sh_degree)) * 3;
  for (size_t i = 0; i < primitives.size(); ++i) {
    if (primitives[i].sh.size() != expected) {
      throw InvalidArgument("primitive " + std::to_string(i) + " has " +
                            std::to_string(primitives[i].sh.size()) + " SH values, expected " +
                            std::to_string(expected));
    }
  }
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

Mat3 quat_to_rotation(const Eigen::Vector4d& q) {
  const double n = q.norm();
  if (!(n > 1e-12)) throw DegenerateQuaternion("quaternion norm " + std::to_string(n));
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 covariance_from_params(const Vec3& log_scale, const Eigen::Vector4d& quat) {
  const Mat3 u = quat_to_rotation(quat);
  const Vec3 s2 = (2.0 * log_scale.array()).exp();
  Mat3 cov = u * s2.asDiagonal() * u.transpose();
  // exact symmetry
  return 0.5 * (cov + cov.transpose());
}

Vec3 evaluate_sh(std::span<const float> sh, int degree, const Vec3& view_dir) {
  if (degree < 0 || degree > kMaxShDegree) {
    throw UnsupportedDegree("sh degree " + std::to_string(degree));
  }
  const int n = sh_coeff_count(degree);
  if (sh.size() != static_cast<size_t>(n) * 3) {
    throw InvalidArgument("evaluate_sh: coefficient count does not match degree");
  }
  double basis[16];
  sh_basis(degree, view_dir.x(), view_dir.y(), view_dir.z(), basis);
  Vec3 rgb = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) rgb[c] += basis[i] * sh[i * 3 + c];
  }
  return rgb;
}

double rgb_to_sh0(double rgb) { return rgb / sh_const::kC0; }

}  // namespace splatflow
