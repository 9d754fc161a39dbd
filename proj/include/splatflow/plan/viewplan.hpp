#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "splatflow/core/camera.hpp"

namespace splatflow::plan {

inline constexpr double kEta = 1.0 / 6.0;

/// ‖R_a - R_b‖_F + η ‖t_a - t_b‖.
double pose_distance(const CameraView& a, const CameraView& b, double eta = kEta);

/// 1 - D(a, b) / normalizer. Throws DegenerateSet when normalizer <= 0.
double covisibility(const CameraView& a, const CameraView& b, double normalizer, double eta = kEta);

/// Largest pairwise pose distance. Throws DegenerateSet when it is zero.
double max_pose_distance(const std::vector<CameraView>& views, double eta = kEta);

struct CovisGraph {
  std::vector<int> nodes;                  // view ids, input order
  std::vector<std::pair<int, int>> edges;  // id pairs (smaller id first), sorted
  std::vector<int> keyframes;              // ids in selection order
};

/// Greedy farthest-point sampling of `count` views under the pose distance,
/// seeded at the view with minimal summed distance. Ties go to the lowest
/// index. Returns input positions.
std::vector<int> farthest_point_keyframes(const std::vector<CameraView>& views, int count, double eta = kEta);

/// ⌈√N⌉ keyframes, all keyframe pairs connected, and each other view linked
/// to its closest keyframe and its k nearest views. Throws InvalidArgument for N < 2.
CovisGraph build_covis_graph(const std::vector<CameraView>& views, int k_neighbors = 2, double eta = kEta);

enum class Provenance { Spline, Sphere };
std::string to_string(Provenance p);

struct TargetPose {
  CameraView view;  // pose plus the intrinsics to render with
  Provenance provenance = Provenance::Spline;
};

struct TargetPoseSet {
  std::vector<TargetPose> poses;
  std::vector<std::string> rejections;  // one line per rejected candidate
};

/// Clamped uniform degree-2 B-spline through the control positions, sampled
/// at n uniform parameters in [0, 1]. Orientations slerp between the two
/// bracketing controls of the control polygon at the same parameter.
/// Throws TooFewControls for fewer than 3 controls.
TargetPoseSet sample_spline_trajectory(const std::vector<CameraView>& controls, int n_targets);

/// Position of the degree-2 clamped uniform B-spline at u in [0, 1].
Vec3 bspline_point(const std::vector<Vec3>& controls, double u);

/// n points on the unit sphere: y = 1 - 2 (i + 0.5) / n, azimuth i times the golden angle.
std::vector<Vec3> fibonacci_sphere(int n);

struct SphereSampling {
  int n_candidates = 100;
  double radius_min = 0.2;
  double radius_max = 0.5;
  double perturb_min_deg = 0.0;
  double perturb_max_deg = 30.0;
};

/// One target pose near `ref`: Fibonacci candidates on a sphere of random
/// radius around the reference centre; the candidate farthest from every
/// source centre wins (lowest index on ties). Its orientation is the
/// reference orientation turned by random yaw and pitch angles.
TargetPose sample_sphere_target(const CameraView& ref, const std::vector<Vec3>& source_centers,
                                const SphereSampling& cfg, std::mt19937_64& rng);

struct FrustumFilter {
  double near_threshold = 0.0;  // camera-frame depth counted as "near"
  double near_fraction_max = 0.3;
  int min_points_in_frustum = 50;
};

/// 0.05 x the median depth of `points` over the given cameras (points in front only).
double default_near_threshold(const std::vector<Vec3>& points, const std::vector<CameraView>& cameras);

/// Keeps candidates with at least min_points_in_frustum points projecting
/// inside the image at positive depth, of which at most near_fraction_max are
/// nearer than near_threshold.
TargetPoseSet filter_target_poses(const std::vector<TargetPose>& candidates, const std::vector<Vec3>& points,
                                  const FrustumFilter& cfg);

/// k source positions (indices) chosen by k-means over the targets in the
/// (position, look direction) space and nearest-source lookup per centroid.
/// Throws KTooLarge when k exceeds the number of sources.
std::vector<int> select_reference_views(const std::vector<CameraView>& sources, const std::vector<CameraView>& targets,
                                        int k, uint64_t seed = 0, int iterations = 50);

/// Plain-text plan: one pose per line, "r00 .. r22 tx ty tz tag".
void write_plan(const TargetPoseSet& set, const std::string& path);
/// Reads a plan; every pose gets `intrinsics`.
TargetPoseSet read_plan(const std::string& path, const Intrinsics& intrinsics);

}  // namespace splatflow::plan
