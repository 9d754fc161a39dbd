#include "splatflow/plan/viewplan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "splatflow/core/error.hpp"

namespace splatflow::plan {
namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

std::vector<std::vector<double>> distance_matrix(const std::vector<CameraView>& views, double eta) {
  const size_t n = views.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i + 1; j < n; ++j) d[i][j] = d[j][i] = pose_distance(views[i], views[j], eta);
  return d;
}

// lowest index wins ties in all argmin/argmax scans below
int argmin_index(const std::vector<double>& v, const std::vector<char>& skip) {
  int best = -1;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!skip.empty() && skip[i]) continue;
    if (best < 0 || v[i] < v[best]) best = static_cast<int>(i);
  }
  return best;
}

Vec6 embed(const CameraView& v) {
  Vec6 e;
  e.head<3>() = v.center();
  e.tail<3>() = v.forward().normalized();
  return e;
}

Mat3 axis_rotation(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis).toRotationMatrix(); }

}  // namespace

double pose_distance(const CameraView& a, const CameraView& b, double eta) {
  return (a.rotation - b.rotation).norm() + eta * (a.translation - b.translation).norm();
}

double covisibility(const CameraView& a, const CameraView& b, double normalizer, double eta) {
  if (!(normalizer > 0.0)) throw DegenerateSet("covisibility: pose distance normalizer is zero");
  return 1.0 - pose_distance(a, b, eta) / normalizer;
}

double max_pose_distance(const std::vector<CameraView>& views, double eta) {
  double m = 0.0;
  for (size_t i = 0; i < views.size(); ++i)
    for (size_t j = i + 1; j < views.size(); ++j) m = std::max(m, pose_distance(views[i], views[j], eta));
  if (!(m > 0.0)) throw DegenerateSet("all poses coincide");
  return m;
}

std::vector<int> farthest_point_keyframes(const std::vector<CameraView>& views, int count, double eta) {
  const int n = static_cast<int>(views.size());
  if (count <= 0 || n == 0) return {};
  count = std::min(count, n);
  const auto d = distance_matrix(views, eta);
  std::vector<double> total(n, 0.0);
  for (int i = 0; i < n; ++i) total[i] = std::accumulate(d[i].begin(), d[i].end(), 0.0);
  std::vector<int> picked{argmin_index(total, {})};
  std::vector<char> used(n, 0);
  used[picked[0]] = 1;
  std::vector<double> nearest = d[picked[0]];
  while (static_cast<int>(picked.size()) < count) {
    int best = -1;
    for (int i = 0; i < n; ++i)
      if (!used[i] && (best < 0 || nearest[i] > nearest[best])) best = i;
    picked.push_back(best);
    used[best] = 1;
    for (int i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], d[best][i]);
  }
  return picked;
}

CovisGraph build_covis_graph(const std::vector<CameraView>& views, int k_neighbors, double eta) {
  const int n = static_cast<int>(views.size());
  if (n < 2) throw InvalidArgument("covisibility graph needs at least two views");
  if (k_neighbors < 0) throw InvalidArgument("k_neighbors must be >= 0");
  const auto d = distance_matrix(views, eta);
  const int kf_count = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)) - 1e-12));
  const auto kf = farthest_point_keyframes(views, kf_count, eta);
  std::vector<char> is_kf(n, 0);
  for (int i : kf) is_kf[i] = 1;

  std::set<std::pair<int, int>> edges;
  auto link = [&](int a, int b) {
    if (a == b) return;
    int ia = views[a].id, ib = views[b].id;
    edges.emplace(std::min(ia, ib), std::max(ia, ib));
  };
  for (size_t a = 0; a < kf.size(); ++a)
    for (size_t b = a + 1; b < kf.size(); ++b) link(kf[a], kf[b]);
  for (int i = 0; i < n; ++i) {
    if (is_kf[i]) continue;
    int best_kf = -1;
    for (int k : kf)
      if (best_kf < 0 || d[i][k] < d[i][best_kf] || (d[i][k] == d[i][best_kf] && k < best_kf)) best_kf = k;
    link(i, best_kf);
    std::vector<int> order;
    for (int j = 0; j < n; ++j)
      if (j != i) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return d[i][a] < d[i][b]; });
    for (int j = 0; j < std::min<int>(k_neighbors, static_cast<int>(order.size())); ++j) link(i, order[j]);
  }

  CovisGraph g;
  for (const auto& v : views) g.nodes.push_back(v.id);
  for (int i : kf) g.keyframes.push_back(views[i].id);
  g.edges.assign(edges.begin(), edges.end());
  return g;
}

std::string to_string(Provenance p) { return p == Provenance::Spline ? "spline" : "sphere"; }

Vec3 bspline_point(const std::vector<Vec3>& controls, double u) {
  const int m = static_cast<int>(controls.size());
  constexpr int p = 2;
  if (m < 3) throw TooFewControls("spline needs at least 3 control poses");
  u = std::clamp(u, 0.0, 1.0);
  std::vector<double> knots;
  for (int i = 0; i <= p; ++i) knots.push_back(0.0);
  for (int j = 1; j <= m - p - 1; ++j) knots.push_back(static_cast<double>(j) / (m - p));
  for (int i = 0; i <= p; ++i) knots.push_back(1.0);

  // Cox-de Boor basis recursion
  int span = m - 1;
  for (int s = p; s < m; ++s)
    if (u >= knots[s] && u < knots[s + 1]) {
      span = s;
      break;
    }
  const int nk = static_cast<int>(knots.size());
  std::vector<double> basis(nk - 1, 0.0);
  basis[span] = 1.0;
  for (int deg = 1; deg <= p; ++deg) {
    std::vector<double> next(nk - 1 - deg, 0.0);
    for (int i = 0; i < nk - 1 - deg; ++i) {
      double left = 0.0, right = 0.0;
      const double dl = knots[i + deg] - knots[i];
      const double dr = knots[i + deg + 1] - knots[i + 1];
      if (dl > 0.0) left = (u - knots[i]) / dl * basis[i];
      if (dr > 0.0) right = (knots[i + deg + 1] - u) / dr * basis[i + 1];
      next[i] = left + right;
    }
    basis = std::move(next);
  }
  Vec3 out = Vec3::Zero();
  for (int i = 0; i < m; ++i) out += basis[i] * controls[i];
  return out;
}

TargetPoseSet sample_spline_trajectory(const std::vector<CameraView>& controls, int n_targets) {
  const int m = static_cast<int>(controls.size());
  if (m < 3) throw TooFewControls("spline needs at least 3 control poses, got " + std::to_string(m));
  if (n_targets < 0) throw InvalidArgument("n_targets must be >= 0");
  std::vector<Vec3> pts;
  for (const auto& c : controls) pts.push_back(c.center());
  TargetPoseSet out;
  for (int i = 0; i < n_targets; ++i) {
    const double u = n_targets == 1 ? 0.0 : static_cast<double>(i) / (n_targets - 1);
    const double s = u * (m - 1);
    const int i0 = std::min(static_cast<int>(std::floor(s)), m - 2);
    const double w = s - i0;
    Eigen::Quaterniond qa(controls[i0].rotation), qb(controls[i0 + 1].rotation);
    const Mat3 r = qa.slerp(w, qb).normalized().toRotationMatrix();
    CameraView v = controls[i0];
    v.image = ImageBuffer();
    v.rotation = r;
    v.translation = bspline_point(pts, u);
    v.id = i;
    out.poses.push_back({v, Provenance::Spline});
  }
  return out;
}

std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> out;
  if (n <= 0) return out;
  const double golden = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * i;
    out.emplace_back(r * std::cos(phi), y, r * std::sin(phi));
  }
  return out;
}

TargetPose sample_sphere_target(const CameraView& ref, const std::vector<Vec3>& source_centers,
                                const SphereSampling& cfg, std::mt19937_64& rng) {
  if (cfg.n_candidates <= 0) throw InvalidArgument("n_candidates must be positive");
  if (!(cfg.radius_min > 0.0) || cfg.radius_max < cfg.radius_min)
    throw InvalidArgument("sphere radius range must satisfy 0 < min <= max");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = cfg.radius_min + (cfg.radius_max - cfg.radius_min) * unit(rng);
  const auto dirs = fibonacci_sphere(cfg.n_candidates);
  int best = 0;
  double best_score = -1.0;
  for (int i = 0; i < cfg.n_candidates; ++i) {
    const Vec3 c = ref.center() + radius * dirs[i];
    double score = std::numeric_limits<double>::infinity();
    for (const auto& s : source_centers) score = std::min(score, (c - s).norm());
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  auto angle = [&]() {
    const double deg = cfg.perturb_min_deg + (cfg.perturb_max_deg - cfg.perturb_min_deg) * unit(rng);
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    return sign * deg * M_PI / 180.0;
  };
  const double yaw = angle();
  const double pitch = angle();
  CameraView v = ref;
  v.image = ImageBuffer();
  v.translation = ref.center() + radius * dirs[best];
  v.rotation = ref.rotation * axis_rotation(Vec3::UnitY(), yaw) * axis_rotation(Vec3::UnitX(), pitch);
  return {v, Provenance::Sphere};
}

double default_near_threshold(const std::vector<Vec3>& points, const std::vector<CameraView>& cameras) {
  std::vector<double> depths;
  for (const auto& cam : cameras)
    for (const auto& p : points) {
      const double z = cam.world_to_camera(p).z();
      if (z > 0.0) depths.push_back(z);
    }
  if (depths.empty()) throw InvalidArgument("no points in front of any camera");
  auto mid = depths.begin() + static_cast<long>(depths.size() / 2);
  std::nth_element(depths.begin(), mid, depths.end());
  return 0.05 * *mid;
}

TargetPoseSet filter_target_poses(const std::vector<TargetPose>& candidates, const std::vector<Vec3>& points,
                                  const FrustumFilter& cfg) {
  TargetPoseSet out;
  for (size_t c = 0; c < candidates.size(); ++c) {
    const CameraView& cam = candidates[c].view;
    const Intrinsics k = cam.intr();
    int inside = 0, near = 0;
    for (const auto& p : points) {
      const Vec3 q = cam.world_to_camera(p);
      if (q.z() <= 0.0) continue;
      const double u = k.fx * q.x() / q.z() + k.cx;
      const double v = k.fy * q.y() / q.z() + k.cy;
      if (u < -0.5 || v < -0.5 || u >= k.width - 0.5 || v >= k.height - 0.5) continue;
      ++inside;
      if (q.z() < cfg.near_threshold) ++near;
    }
    std::ostringstream why;
    if (inside < cfg.min_points_in_frustum) {
      why << "candidate " << c << " (" << to_string(candidates[c].provenance) << "): " << inside
          << " points in frustum < " << cfg.min_points_in_frustum;
    } else {
      const double frac = static_cast<double>(near) / inside;
      if (frac > cfg.near_fraction_max)
        why << "candidate " << c << " (" << to_string(candidates[c].provenance) << "): near fraction " << frac
            << " > " << cfg.near_fraction_max;
    }
    if (why.str().empty())
      out.poses.push_back(candidates[c]);
    else
      out.rejections.push_back(why.str());
  }
  return out;
}

std::vector<int> select_reference_views(const std::vector<CameraView>& sources, const std::vector<CameraView>& targets,
                                        int k, uint64_t seed, int iterations) {
  const int ns = static_cast<int>(sources.size());
  if (k <= 0) throw InvalidArgument("k must be positive");
  if (k > ns) throw KTooLarge("k = " + std::to_string(k) + " exceeds " + std::to_string(ns) + " source views");
  if (targets.empty()) throw NoValidTargets("no target poses to cluster");
  std::vector<Vec6> pts;
  for (const auto& t : targets) pts.push_back(embed(t));
  const int n = static_cast<int>(pts.size());

  // k-means++ seeding
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec6> centers;
  centers.push_back(pts[std::min(n - 1, static_cast<int>(unit(rng) * n))]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (pts[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    int pick = 0;
    if (total > 0.0) {
      double r = unit(rng) * total;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        r -= d2[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pts[pick]);
  }

  std::vector<int> assign(n, 0);
  for (int it = 0; it < iterations; ++it) {
    bool changed = it == 0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      for (int c = 1; c < k; ++c)
        if ((pts[i] - centers[c]).squaredNorm() < (pts[i] - centers[best]).squaredNorm()) best = c;
      if (best != assign[i]) changed = true;
      assign[i] = best;
    }
    std::vector<Vec6> sum(k, Vec6::Zero());
    std::vector<int> cnt(k, 0);
    for (int i = 0; i < n; ++i) {
      sum[assign[i]] += pts[i];
      ++cnt[assign[i]];
    }
    for (int c = 0; c < k; ++c)
      if (cnt[c] > 0) centers[c] = sum[c] / cnt[c];
    if (!changed) break;
  }

  std::vector<Vec6> src;
  for (const auto& s : sources) src.push_back(embed(s));
  std::vector<char> taken(ns, 0);
  std::vector<int> out;
  for (const auto& c : centers) {
    std::vector<double> dist(ns);
    for (int s = 0; s < ns; ++s) dist[s] = (src[s] - c).squaredNorm();
    const int best = argmin_index(dist, taken);
    taken[best] = 1;
    out.push_back(best);
  }
  return out;
}

void write_plan(const TargetPoseSet& set, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f << std::setprecision(17);
  for (const auto& p : set.poses) {
    const Mat3& r = p.view.rotation;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) f << r(i, j) << ' ';
    const Vec3& t = p.view.translation;
    f << t.x() << ' ' << t.y() << ' ' << t.z() << ' ' << to_string(p.provenance) << '\n';
  }
  if (!f) throw IoError("write failed: " + path);
}

TargetPoseSet read_plan(const std::string& path, const Intrinsics& intrinsics) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  TargetPoseSet out;
  std::string line;
  std::size_t offset = 0;
  int id = 0;
  while (std::getline(f, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Mat3 r;
    Vec3 t;
    std::string tag;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) ss >> r(i, j);
    ss >> t.x() >> t.y() >> t.z() >> tag;
    if (!ss || (tag != "spline" && tag != "sphere")) throw FormatError("malformed plan line", line_start);
    out.poses.push_back({make_camera(orthonormalize(r), t, intrinsics, id++),
                         tag == "spline" ? Provenance::Spline : Provenance::Sphere});
  }
  return out;
}

}  // namespace splatflow::plan
