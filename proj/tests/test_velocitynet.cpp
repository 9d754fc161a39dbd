#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include "doctest.h"
#include "nn_grad_check.hpp"
#include "oracles.hpp"
#include "splatflow/core/error.hpp"
#include "splatflow/nn/encoding.hpp"
#include "splatflow/nn/model.hpp"
#include "splatflow/nn/toy.hpp"
#include "splatflow/nn/train.hpp"

using namespace splatflow;
using namespace splatflow::nn;

using testing::op_grad_error;
using testing::randn;

namespace {

ModelConfig small_config() { return testing::small_model_config(); }

ModelInput random_input(uint64_t seed, int n, int m, int hw = 4) { return testing::random_model_input(seed, n, m, hw); }

}  // namespace

TEST_CASE("elementwise and linear op gradients match finite differences") {
  for (uint64_t s = 0; s < 3; ++s) {
    CHECK(op_grad_error([](const auto& v) { return linear(v[0], v[1], v[2]); },
                        {randn(s, {5, 4}), randn(s + 10, {4, 3}), randn(s + 20, {3})}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return gelu(v[0]); }, {randn(s, {4, 6}, 2.0)}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return silu(v[0]); }, {randn(s, {4, 6}, 2.0)}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return mul(v[0], v[1]); }, {randn(s, {3, 3}), randn(s + 1, {3, 3})}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return sub(v[0], scale(v[1], 0.3)); }, {randn(s, {3, 3}), randn(s + 1, {3, 3})}, s) < 1e-3);
  }
}

TEST_CASE("normalisation and modulation op gradients match finite differences") {
  for (uint64_t s = 0; s < 3; ++s) {
    CHECK(op_grad_error([](const auto& v) { return layer_norm(v[0]); }, {randn(s, {6, 8})}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return modulate(v[0], v[1], v[2], 3); },
                        {randn(s, {6, 5}), randn(s + 1, {2, 5}), randn(s + 2, {2, 5})}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return gate(v[0], v[1], 2); }, {randn(s, {6, 5}), randn(s + 1, {3, 5})}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return add_rows(v[0], v[1], 3); }, {randn(s, {6, 5}), randn(s + 1, {2, 5})}, s) < 1e-3);
  }
}

TEST_CASE("attention op gradients match finite differences") {
  for (uint64_t s = 0; s < 3; ++s) {
    const auto q = randn(s, {8, 6}), k = randn(s + 1, {8, 6}), v = randn(s + 2, {8, 6});
    CHECK(op_grad_error([](const auto& x) { return attention(x[0], x[1], x[2], 2, 4); }, {q, k, v}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& x) { return attention(x[0], x[1], x[2], 3, 8); }, {q, k, v}, s) < 1e-3);
  }
}

TEST_CASE("structural op gradients match finite differences") {
  for (uint64_t s = 0; s < 2; ++s) {
    CHECK(op_grad_error([](const auto& v) { return patchify(v[0]); }, {randn(s, {2, 4, 6, 3})}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return unpatchify(v[0], 2, 4, 2, 3); }, {randn(s, {4, 12})}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return concat_cols(v[0], v[1]); }, {randn(s, {3, 2}), randn(s + 1, {3, 4})}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return slice_cols(v[0], 1, 3); }, {randn(s, {3, 5})}, s) < 1e-3);
    CHECK(op_grad_error([](const auto& v) { return slice_rows(v[0], 1, 3); }, {randn(s, {4, 5})}, s) < 1e-3);
    const Tensor target = randn(s + 9, {12});
    CHECK(op_grad_error([&](const auto& v) { return mse(v[0], target); }, {randn(s, {3, 4})}, s) < 1e-3);
  }
}

TEST_CASE("model gradient of the CFM loss matches finite differences") {
  for (uint64_t seed = 0; seed < 2; ++seed) {
    const auto res = testing::model_grad_error(seed);
    INFO(res.worst_param);
    CHECK(res.checked > 40);
    CHECK(res.worst_rel < 5e-3);
  }
}

TEST_CASE("raymap examples and Plücker constraint") {
  const Intrinsics intr{8.0, 8.0, 3.5, 3.5, 8, 8};
  const CameraView j = make_camera(Mat3::Identity(), Vec3::Zero(), intr);
  const ImageBuffer self = compute_raymap(j, j, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x)
      for (int a = 0; a < 3; ++a) CHECK(self.at(y, x, a) == 0.0);

  const Intrinsics odd{9.0, 9.0, 4.0, 4.0, 9, 9};
  const CameraView i = make_camera(Mat3::Identity(), Vec3(1, 0, 0), odd);
  const CameraView j9 = make_camera(Mat3::Identity(), Vec3::Zero(), odd);
  const ImageBuffer r = compute_raymap(i, j9, 9, 9);
  CHECK(r.at(4, 4, 3) == doctest::Approx(0.0));
  CHECK(r.at(4, 4, 4) == doctest::Approx(0.0));
  CHECK(r.at(4, 4, 5) == doctest::Approx(1.0));
  CHECK(r.at(4, 4, 0) == doctest::Approx(0.0));
  CHECK(r.at(4, 4, 1) == doctest::Approx(-1.0));
  CHECK(r.at(4, 4, 2) == doctest::Approx(0.0));

  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Quaterniond qa(n(rng), n(rng), n(rng), n(rng)), qb(n(rng), n(rng), n(rng), n(rng));
    const CameraView a = make_camera(qa.normalized().toRotationMatrix(), Vec3(n(rng), n(rng), n(rng)), intr);
    const CameraView b = make_camera(qb.normalized().toRotationMatrix(), Vec3(n(rng), n(rng), n(rng)), intr);
    const ImageBuffer m = compute_raymap(a, b, 4, 6);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 6; ++x) {
        const Vec3 mo(m.at(y, x, 0), m.at(y, x, 1), m.at(y, x, 2));
        const Vec3 d(m.at(y, x, 3), m.at(y, x, 4), m.at(y, x, 5));
        CHECK(std::abs(mo.dot(d)) < 1e-6);
        CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("reference view is the one nearest the centroid") {
  const Intrinsics intr{8.0, 8.0, 3.5, 3.5, 8, 8};
  std::vector<CameraView> v;
  for (double x : {0.0, 1.0, 5.0}) v.push_back(make_camera(Mat3::Identity(), Vec3(x, 0, 0), intr));
  CHECK(reference_view(v) == 1);
}

TEST_CASE("patchify layout, round trip and errors") {
  Tensor grid({1, 4, 4, 1});
  for (int i = 0; i < 16; ++i) grid.data[i] = i;
  const Tensor tok = patchify(grid);
  REQUIRE(tok.shape == std::vector<int>{4, 4});
  CHECK(tok.data == std::vector<double>{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15});
  const Tensor x = randn(9, {1, 8, 8, 16});
  const Tensor p = patchify(x);
  CHECK(p.shape == std::vector<int>{16, 64});
  CHECK(unpatchify(p, 1, 8, 8, 16) == x);
  CHECK_THROWS_AS(patchify(Tensor({1, 3, 4, 2})), OddDimensions);
}

TEST_CASE("view index encoding") {
  const auto e0 = view_index_encoding(0, 32);
  for (int k = 0; k < 16; ++k) {
    CHECK(e0[2 * k] == 0.0);
    CHECK(e0[2 * k + 1] == 1.0);
  }
  std::vector<std::vector<double>> all;
  for (int i = 0; i <= 1000; ++i) all.push_back(view_index_encoding(i, 32));
  double min_d = 1e9, min_n = 1e9, max_n = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    double nn = 0.0;
    for (double v : all[i]) nn += v * v;
    min_n = std::min(min_n, std::sqrt(nn));
    max_n = std::max(max_n, std::sqrt(nn));
    for (int j = i + 1; j <= 1000; ++j) {
      double d = 0.0;
      for (int k = 0; k < 32; ++k) d += (all[i][k] - all[j][k]) * (all[i][k] - all[j][k]);
      min_d = std::min(min_d, d);
    }
  }
  CHECK(min_d > 1e-6);
  CHECK(max_n <= 1.2 * min_n);
  CHECK_THROWS_AS(view_index_encoding(-1, 32), InvalidArgument);
}

TEST_CASE("forward shape contract and zero-initialised output") {
  VelocityModel model(small_config(), 1);
  ModelInput in = random_input(10, 1, 0, 8);
  const Tensor out = model.predict(in);
  CHECK(out.shape == in.targets.shape);
  for (double v : out.data) CHECK(v == 0.0);
  in.t.push_back(0.3);
  CHECK_THROWS_AS(model.predict(in), ShapeMismatch);
}

TEST_CASE("zero-initialised multi-view branch leaves outputs bit-identical") {
  VelocityModel fresh(small_config(), 2);
  const ModelInput in = random_input(11, 2, 2);
  CHECK(fresh.predict(in, true) == fresh.predict(in, false));
  VelocityModel model(small_config(), 2);
  model.randomize_all(12, /*keep_multiview_zero=*/true);
  const Tensor with = model.predict(in, true);
  const Tensor without = model.predict(in, false);
  CHECK(with == without);
  double mag = 0.0;
  for (double v : with.data) mag += std::abs(v);
  CHECK(mag > 0.0);
  model.randomize_all(12, false);
  CHECK_FALSE(model.predict(in, true) == model.predict(in, false));
}

TEST_CASE("permuting source frames with their ray maps and indices leaves targets unchanged") {
  VelocityModel model(small_config(), 3);
  model.randomize_all(13);
  const ModelInput in = random_input(14, 2, 3);
  ModelInput perm = in;
  const std::vector<int> order{2, 0, 1};
  const size_t fs = in.sources.frame_size(), rs = in.raymaps.frame_size();
  for (int k = 0; k < 3; ++k) {
    std::copy_n(in.sources.data.begin() + order[k] * fs, fs, perm.sources.data.begin() + k * fs);
    std::copy_n(in.raymaps.data.begin() + (2 + order[k]) * rs, rs, perm.raymaps.data.begin() + (2 + k) * rs);
    perm.indices[2 + k] = in.indices[2 + order[k]];
  }
  const Tensor a = model.predict(in), b = model.predict(perm);
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  CHECK(worst < 1e-12);
}

TEST_CASE("lr = 0 leaves parameters bit-identical") {
  VelocityModel model(small_config(), 4);
  model.randomize_all(15);
  std::vector<std::vector<double>> values;
  for (auto& [n, p] : model.parameters()) values.push_back(p->value);
  flow::FlowBatch b;
  b.z0 = randn(16, {1, 4, 4, 3});
  b.z1 = randn(17, {1, 4, 4, 3});
  b.cond.raymaps = randn(18, {1, 4, 4, 6});
  TrainConfig cfg;
  cfg.steps = 5;
  cfg.lr = 0.0;
  train_toy(model, {b}, cfg);
  size_t k = 0;
  for (auto& [n, p] : model.parameters()) CHECK(p->value == values[k++]);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  VelocityModel model(small_config(), 5);
  model.randomize_all(19);
  const auto path = (std::filesystem::temp_directory_path() / "splatflow_test_model.bin").string();
  model.save(path);
  const VelocityModel loaded = VelocityModel::load(path);
  CHECK(loaded == model);
  const ModelInput in = random_input(20, 1, 1);
  CHECK(loaded.predict(in) == model.predict(in));
  // truncated file
  {
    std::ifstream is(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
  }
  CHECK_THROWS_AS(VelocityModel::load(path), FormatError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(VelocityModel::load(path), IoError);
}

TEST_CASE("random view indices are sorted and distinct") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto idx = random_indices(1 + trial % 8, rng);
    for (size_t i = 1; i < idx.size(); ++i) CHECK(idx[i] > idx[i - 1]);
    CHECK(idx.front() >= 0);
    CHECK(idx.back() <= 1000);
  }
}

TEST_CASE("corruption dataset: severity 0 gives identical pairs") {
  CorruptionTaskConfig cfg;
  cfg.image_size = 32;
  cfg.latent_factor = 4;
  cfg.primitives = 30;
  const auto id = make_corruption_dataset(cfg, 3, 1, 0.0);
  for (const auto& b : id) CHECK(b.z0 == b.z1);
  const auto bad = make_corruption_dataset(cfg, 3, 1, 1.0);
  CHECK(mean_corruption_mse(bad) > 1e-3);
  CHECK(bad[0].cond.raymaps.shape == std::vector<int>{2, 8, 8, 6});
  std::mt19937_64 rng(2);
  const auto g = to_gaussian_source(bad[0], rng);
  CHECK(g.cond.sources.frames() == 2);
  CHECK(g.cond.raymaps.frames() == 3);
  CHECK(g.z1 == bad[0].z1);
}

TEST_CASE("toy training reduces validation CFM loss") {
  CorruptionTaskConfig task;
  task.image_size = 32;
  task.latent_factor = 4;
  task.primitives = 30;
  const auto train = make_corruption_dataset(task, 64, 3);
  const auto val = make_corruption_dataset(task, 16, 4);
  ModelConfig mc = small_config();
  VelocityModel model(mc, 6);
  const double before = validation_loss(model, val);
  TrainConfig cfg;
  cfg.steps = 300;
  cfg.batch_size = 4;
  cfg.lr = 2e-3;
  cfg.warmup_steps = 20;
  const auto res = train_toy(model, train, cfg);
  const double after = validation_loss(model, val);
  MESSAGE("validation CFM ", before, " -> ", after);
  for (double l : res.loss_history) CHECK(std::isfinite(l));
  CHECK(after < before);
}
