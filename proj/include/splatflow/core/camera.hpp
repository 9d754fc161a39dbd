#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "splatflow/core/image.hpp"

namespace splatflow {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics plus image size.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  Mat3 matrix() const;
  static Intrinsics from_matrix(const Mat3& K, int width, int height);
};

/// A posed, calibrated view.
///
/// Convention: `rotation`/`translation` map camera coordinates to world
/// coordinates (x_w = R x_c + t). The camera looks along +z, +x is right and
/// +y is down in pixel space. Pixel (u, v) has its centre at integer
/// coordinates, so u = fx * x / z + cx.
struct CameraView {
  ImageBuffer image;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Mat3 intrinsics = Mat3::Identity();
  int id = 0;
  int width = 0;
  int height = 0;

  Vec3 center() const { return translation; }
  Vec3 forward() const { return rotation.col(2); }
  Vec3 world_to_camera(const Vec3& p) const { return rotation.transpose() * (p - translation); }
  Intrinsics intr() const { return Intrinsics::from_matrix(intrinsics, width, height); }

  /// Throws InvalidArgument if R is not a rotation or K is not a pinhole matrix.
  void validate() const;
};

CameraView make_camera(const Mat3& rotation, const Vec3& translation, const Intrinsics& intr, int id = 0);

/// Camera at `eye` looking at `target`, with `up` roughly pointing to -y in image space.
Mat3 look_at_rotation(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0.0, -1.0, 0.0));

/// Projects the nearest rotation matrix (SVD) onto SO(3).
Mat3 orthonormalize(const Mat3& m);

}  // namespace splatflow
