#include "splatflow/core/camera.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "splatflow/core/error.hpp"

namespace splatflow {

Mat3 Intrinsics::matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

Intrinsics Intrinsics::from_matrix(const Mat3& K, int width, int height) {
  return {K(0, 0), K(1, 1), K(0, 2), K(1, 2), width, height};
}

void CameraView::validate() const {
  const Mat3& r = rotation;
  if ((r.transpose() * r - Mat3::Identity()).norm() > 1e-6) {
    throw InvalidArgument("camera rotation is not orthonormal");
  }
  if (std::abs(r.determinant() - 1.0) > 1e-6) {
    throw InvalidArgument("camera rotation has determinant != 1");
  }
  const Mat3& k = intrinsics;
  if (k(2, 2) != 1.0 || k(1, 0) != 0.0 || k(2, 0) != 0.0 || k(2, 1) != 0.0) {
    throw InvalidArgument("intrinsics are not an upper-triangular pinhole matrix");
  }
  if (!(k(0, 0) > 0.0) || !(k(1, 1) > 0.0)) {
    throw InvalidArgument("focal lengths must be positive");
  }
}

CameraView make_camera(const Mat3& rotation, const Vec3& translation, const Intrinsics& intr, int id) {
  CameraView cam;
  cam.rotation = rotation;
  cam.translation = translation;
  cam.intrinsics = intr.matrix();
  cam.width = intr.width;
  cam.height = intr.height;
  cam.id = id;
  return cam;
}

Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  // Image +y points down, so the camera's y axis is the projection of -up.
  Vec3 down = -up;
  Vec3 right = down.cross(forward);
  if (right.norm() < 1e-9) {
    // forward parallel to up: pick any perpendicular
    right = forward.unitOrthogonal();
  }
  right.normalize();
  down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return r;
}

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace splatflow
