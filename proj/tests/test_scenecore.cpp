#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "splatflow/core/error.hpp"
#include "splatflow/core/io.hpp"

using namespace splatflow;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "splatflow_tests";
  fs::create_directories(dir);
  return dir / name;
}

Eigen::Vector4d axis_angle_quat(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized() * std::sin(angle / 2);
  return {std::cos(angle / 2), a.x(), a.y(), a.z()};
}

}  // namespace

TEST_CASE("covariance_from_params closed forms") {
  const Eigen::Vector4d identity(1, 0, 0, 0);
  CHECK((covariance_from_params(Vec3::Zero(), identity) - Mat3::Identity()).norm() < 1e-15);

  const Mat3 c2 = covariance_from_params(Vec3(std::log(2.0), 0, 0), identity);
  CHECK((c2 - Vec3(4, 1, 1).asDiagonal().toDenseMatrix()).norm() < 1e-12);

  // 90° about z maps x->y, y->-x: U diag(4,9,25) Uᵀ = diag(9,4,25).
  const Mat3 c3 = covariance_from_params(Vec3(std::log(2.0), std::log(3.0), std::log(5.0)),
                                         axis_angle_quat(Vec3::UnitZ(), std::numbers::pi / 2));
  Mat3 u;
  u << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 expected = u * Vec3(4, 9, 25).asDiagonal() * u.transpose();
  CHECK((c3 - expected).norm() < 1e-12);
  CHECK(c3(0, 0) == doctest::Approx(9.0).epsilon(1e-12));
  CHECK(c3(1, 1) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("covariance_from_params rejects degenerate quaternion") {
  CHECK_THROWS_AS(covariance_from_params(Vec3::Zero(), Eigen::Vector4d::Zero()), DegenerateQuaternion);
  CHECK_THROWS_AS(covariance_from_params(Vec3::Zero(), Eigen::Vector4d(1e-13, 0, 0, 0)), DegenerateQuaternion);
}

TEST_CASE("covariance is symmetric PSD with rotation-invariant trace") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0, 1);
  std::uniform_real_distribution<double> ls(-3, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 log_s(ls(rng), ls(rng), ls(rng));
    const Eigen::Vector4d q(n(rng), n(rng), n(rng), n(rng));
    const Mat3 c = covariance_from_params(log_s, q);
    CHECK((c - c.transpose()).norm() <= 1e-12);
    const double trace = std::exp(2 * log_s[0]) + std::exp(2 * log_s[1]) + std::exp(2 * log_s[2]);
    CHECK(std::abs(c.trace() - trace) < 1e-9);
    Eigen::SelfAdjointEigenSolver<Mat3> es(c);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("evaluate_sh degree 0 and band-1 odd symmetry") {
  std::vector<float> sh0 = {1.0f, 2.0f, -0.5f};
  const Vec3 c = evaluate_sh(sh0, 0, Vec3(0.3, -0.2, 0.9).normalized());
  CHECK(c[0] == doctest::Approx(0.2820947918).epsilon(1e-9));
  CHECK(c[1] == doctest::Approx(2 * 0.2820947918).epsilon(1e-9));
  CHECK(c[2] == doctest::Approx(-0.5 * 0.2820947918).epsilon(1e-9));

  // Only the +z band-1 coefficient (index 2) set.
  std::vector<float> sh1(4 * 3, 0.0f);
  for (int ch = 0; ch < 3; ++ch) sh1[2 * 3 + ch] = 1.0f;
  const Vec3 up = evaluate_sh(sh1, 1, Vec3(0, 0, 1));
  const Vec3 down = evaluate_sh(sh1, 1, Vec3(0, 0, -1));
  CHECK(up[0] == doctest::Approx(sh_const::kC1));
  CHECK((up + down).norm() < 1e-15);
}

TEST_CASE("evaluate_sh matches textbook spherical harmonics up to degree 3") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0, 1);
  std::vector<float> coeffs(16 * 3);
  for (auto& v : coeffs) v = static_cast<float>(n(rng));
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Vec3 got = evaluate_sh(coeffs, 3, dir);
    Vec3 ref = Vec3::Zero();
    for (int l = 0; l <= 3; ++l) {
      for (int m = -l; m <= l; ++m) {
        const int idx = l * l + l + m;
        const double y = testing::sh_textbook(l, m, dir);
        for (int ch = 0; ch < 3; ++ch) ref[ch] += y * coeffs[idx * 3 + ch];
      }
    }
    CHECK((got - ref).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("evaluate_sh is linear in coefficients") {
  // Dyadic coefficients and weights keep a*c1 + b*c2 exactly representable in float.
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> ci(-16, 16);
  std::normal_distribution<double> n(0, 1);
  const double weights[] = {0.5, -1.25, 2.0, 3.0, -0.75};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<float> c1(16 * 3), c2(16 * 3), mix(16 * 3);
    const double a = weights[trial % 5], b = weights[(trial + 2) % 5];
    for (size_t i = 0; i < c1.size(); ++i) {
      c1[i] = static_cast<float>(ci(rng) / 4.0);
      c2[i] = static_cast<float>(ci(rng) / 4.0);
      mix[i] = static_cast<float>(a * c1[i] + b * c2[i]);
    }
    const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Vec3 lhs = evaluate_sh(mix, 3, dir);
    const Vec3 rhs = a * evaluate_sh(c1, 3, dir) + b * evaluate_sh(c2, 3, dir);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("evaluate_sh rejects degree above 3") {
  std::vector<float> sh(25 * 3, 0.0f);
  CHECK_THROWS_AS(evaluate_sh(sh, 4, Vec3::UnitZ()), UnsupportedDegree);
}

TEST_CASE("scene save/load round trip is bit exact") {
  GaussianScene one;
  one.sh_degree = 0;
  one.scene_scale = 1.7;
  GaussianPrimitive g;
  g.position = {0.1f, -2.0f, 3.5f};
  g.log_scale = {-1.0f, -2.0f, 0.25f};
  g.rotation = {0.5f, 0.5f, -0.5f, 0.5f};
  g.opacity_logit = 0.75f;
  g.sh = {1.0f, 2.0f, 3.0f};
  one.primitives.push_back(g);
  const auto p1 = temp_path("one.flwr");
  save_scene(one, p1);
  CHECK(load_scene(p1) == one);

  const GaussianScene big = testing::random_scene(99, 10000, 3);
  const auto p2 = temp_path("big.flwr");
  save_scene(big, p2);
  const GaussianScene back = load_scene(p2);
  REQUIRE(back.size() == big.size());
  CHECK(back == big);
  // Bit-level check on a few floats to rule out NaN-equality quirks.
  CHECK(std::memcmp(back.primitives[1234].sh.data(), big.primitives[1234].sh.data(), 16 * 3 * sizeof(float)) == 0);
}

TEST_CASE("load_scene reports malformed input") {
  const GaussianScene s = testing::random_scene(5, 10, 1);
  const auto p = temp_path("trunc.flwr");
  save_scene(s, p);
  const auto full = fs::file_size(p);
  fs::resize_file(p, full - 7);
  CHECK_THROWS_AS(load_scene(p), FormatError);
  try {
    load_scene(p);
  } catch (const FormatError& e) {
    CHECK(e.offset() > 0);
  }

  const auto bad = temp_path("bad_magic.flwr");
  {
    std::ofstream out(bad, std::ios::binary);
    out << "NOPE1xxxxxxxxxxxxxxxx";
  }
  CHECK_THROWS_AS(load_scene(bad), FormatError);
  CHECK_THROWS_AS(load_scene(temp_path("does_not_exist.flwr")), IoError);
}

TEST_CASE("PPM round trip is exact for 8-bit values") {
  ImageBuffer img(5, 7, 3);
  for (size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<double>((i * 37) % 256) / 255.0;
  const auto p = temp_path("img.ppm");
  write_ppm(img, p);
  const ImageBuffer back = read_ppm(p);
  CHECK(back.same_shape(img));
  CHECK(back.data == img.data);
}

TEST_CASE("camera list round trip preserves poses exactly") {
  std::mt19937_64 rng(2);
  std::vector<CameraRecord> recs;
  for (int i = 0; i < 4; ++i) {
    CameraRecord r;
    r.view = make_camera(testing::random_rotation(rng), Vec3(0.1 * i, 1.0 / 3.0, -2.0),
                         Intrinsics{30.5, 31.25, 15.5, 16.0, 32, 32}, i);
    r.image_path = "view_" + std::to_string(i) + ".ppm";
    recs.push_back(r);
  }
  const auto p = temp_path("cams.txt");
  write_camera_list(recs, p);
  const auto back = read_camera_list(p);
  REQUIRE(back.size() == recs.size());
  for (size_t i = 0; i < recs.size(); ++i) {
    CHECK(back[i].view.rotation == recs[i].view.rotation);
    CHECK(back[i].view.translation == recs[i].view.translation);
    CHECK(back[i].view.intrinsics == recs[i].view.intrinsics);
    CHECK(back[i].image_path == recs[i].image_path);
  }
}

TEST_CASE("camera validation enforces the invariants") {
  CameraView cam = testing::front_camera(16, 16, 20.0);
  CHECK_NOTHROW(cam.validate());
  cam.rotation(0, 0) = -cam.rotation(0, 0);  // reflection
  CHECK_THROWS_AS(cam.validate(), InvalidArgument);
  cam = testing::front_camera(16, 16, 20.0);
  cam.intrinsics(1, 0) = 0.1;
  CHECK_THROWS_AS(cam.validate(), InvalidArgument);
}
