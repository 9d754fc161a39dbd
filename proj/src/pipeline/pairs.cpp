#include "splatflow/pipeline/pairs.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "splatflow/core/error.hpp"
#include "splatflow/pipeline/config.hpp"
#include "splatflow/pipeline/refine.hpp"
#include "splatflow/render/rasterizer.hpp"

namespace splatflow::pipeline {

std::vector<PairRecord> generate_pairs(const SyntheticScene& scene, const std::vector<int>& sparsity_levels,
                                       const ReconConfig& cfg, int n_refs, std::vector<std::string>* warnings) {
  std::vector<PairRecord> out;
  const int n = static_cast<int>(scene.views.size());
  for (int s : sparsity_levels) {
    const auto pos = equally_spaced(n, s);
    std::vector<int> ids;
    for (int p : pos) ids.push_back(scene.views[p].view.id);
    std::vector<InputView> inputs = select_views(scene.views, ids);
    std::vector<CameraView> input_cams;
    for (const auto& v : inputs) input_cams.push_back(v.view);
    std::vector<const InputView*> held;
    for (const auto& v : scene.views)
      if (std::find(ids.begin(), ids.end(), v.view.id) == ids.end()) held.push_back(&v);
    if (held.empty()) {
      if (warnings) warnings->push_back("sparsity " + std::to_string(s) + ": no held-out views, no pairs");
      continue;
    }
    const auto rec = initial_reconstruction(inputs, cfg);
    for (const InputView* h : held) {
      PairRecord p;
      p.rendering = render::rasterize(rec.scene, h->view).color;
      p.ground_truth = h->view.image;
      p.camera = h->view;
      p.camera.image = ImageBuffer();
      p.source_view_ids = ids;
      p.sparsity = s;
      for (int r : reference_sources(input_cams, h->view, n_refs)) p.references.push_back(input_cams[r]);
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<flow::FlowBatch> make_flow_dataset(const std::vector<PairRecord>& pairs, int latent_factor) {
  std::vector<flow::FlowBatch> out;
  for (const auto& p : pairs) out.push_back(make_flow_item(p.rendering, &p.ground_truth, p.camera, p.references, latent_factor));
  return out;
}

std::vector<PairRecord> generate_training_pairs(const SceneSetup& scene, const ReconConfig& recon,
                                                const FlowSetup& flow, int n_refs, std::vector<std::string>* warnings) {
  std::vector<PairRecord> out;
  for (int i = 0; i < flow.pair_scenes; ++i) {
    const SyntheticScene s = generate_synthetic_scene(flow.pair_seed + static_cast<uint64_t>(i), scene);
    auto p = generate_pairs(s, flow.sparsity_levels, recon, n_refs, warnings);
    for (auto& r : p) out.push_back(std::move(r));
  }
  return out;
}

nn::VelocityModel train_flow_model(const std::vector<PairRecord>& pairs, const FlowSetup& flow,
                                   nn::TrainResult* result) {
  if (pairs.empty()) throw InvalidArgument("no training pairs");
  nn::VelocityModel model(flow.model, flow.train.seed);
  const auto data = make_flow_dataset(pairs, flow.glue.latent_factor);
  auto r = nn::train_toy(model, data, flow.train);
  if (result) *result = std::move(r);
  return model;
}

namespace {

constexpr char kMagic[8] = {'F', 'L', 'W', 'R', 'P', 'A', 'R', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError("truncated pair file", static_cast<size_t>(std::max<std::streamoff>(0, is.gcount())));
  return v;
}

void put_image(std::ostream& os, const ImageBuffer& img) {
  put<int32_t>(os, img.height);
  put<int32_t>(os, img.width);
  put<int32_t>(os, img.channels);
  os.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.size() * sizeof(double)));
}

ImageBuffer get_image(std::istream& is) {
  const int h = get<int32_t>(is), w = get<int32_t>(is), c = get<int32_t>(is);
  if (h < 0 || w < 0 || c < 0 || static_cast<long>(h) * w * c > (1L << 28))
    throw FormatError("bad image header in pair file", static_cast<size_t>(is.tellg()));
  ImageBuffer img(h, w, c);
  is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.size() * sizeof(double)));
  if (!is) throw FormatError("truncated image in pair file", static_cast<size_t>(is.gcount()));
  return img;
}

void put_camera(std::ostream& os, const CameraView& c) {
  put<int32_t>(os, c.id);
  put<int32_t>(os, c.width);
  put<int32_t>(os, c.height);
  for (int i = 0; i < 9; ++i) put<double>(os, c.rotation.data()[i]);
  for (int i = 0; i < 3; ++i) put<double>(os, c.translation[i]);
  for (int i = 0; i < 9; ++i) put<double>(os, c.intrinsics.data()[i]);
  put_image(os, c.image);
}

CameraView get_camera(std::istream& is) {
  CameraView c;
  c.id = get<int32_t>(is);
  c.width = get<int32_t>(is);
  c.height = get<int32_t>(is);
  for (int i = 0; i < 9; ++i) c.rotation.data()[i] = get<double>(is);
  for (int i = 0; i < 3; ++i) c.translation[i] = get<double>(is);
  for (int i = 0; i < 9; ++i) c.intrinsics.data()[i] = get<double>(is);
  c.image = get_image(is);
  return c;
}

}  // namespace

void save_pairs(const std::vector<PairRecord>& pairs, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f.write(kMagic, 8);
  put<uint64_t>(f, pairs.size());
  for (const auto& p : pairs) {
    put<int32_t>(f, p.sparsity);
    put<int32_t>(f, static_cast<int32_t>(p.source_view_ids.size()));
    for (int id : p.source_view_ids) put<int32_t>(f, id);
    put_camera(f, p.camera);
    put_image(f, p.rendering);
    put_image(f, p.ground_truth);
    put<int32_t>(f, static_cast<int32_t>(p.references.size()));
    for (const auto& r : p.references) put_camera(f, r);
  }
  if (!f) throw IoError("write failed: " + path);
}

std::vector<PairRecord> load_pairs(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0) throw FormatError("not a pair file", 0);
  const auto n = get<uint64_t>(f);
  std::vector<PairRecord> out;
  for (uint64_t i = 0; i < n; ++i) {
    PairRecord p;
    p.sparsity = get<int32_t>(f);
    const int ns = get<int32_t>(f);
    if (ns < 0 || ns > 100000) throw FormatError("bad source count", static_cast<size_t>(f.tellg()));
    for (int k = 0; k < ns; ++k) p.source_view_ids.push_back(get<int32_t>(f));
    p.camera = get_camera(f);
    p.rendering = get_image(f);
    p.ground_truth = get_image(f);
    const int nr = get<int32_t>(f);
    if (nr < 0 || nr > 100000) throw FormatError("bad reference count", static_cast<size_t>(f.tellg()));
    for (int k = 0; k < nr; ++k) p.references.push_back(get_camera(f));
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace splatflow::pipeline
