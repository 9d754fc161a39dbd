#include "splatflow/nn/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "splatflow/nn/encoding.hpp"

namespace splatflow::nn {

namespace {

bool zero_initialised(const std::string& name) {
  // adaLN modulation, the multi-view output layer and the final projection
  return name.find(".ada.") != std::string::npos || name.find("mv_out.") != std::string::npos ||
         name.rfind("final.", 0) == 0;
}

bool multiview_output(const std::string& name) { return name.find("mv_out.") != std::string::npos; }

void init_param(Node& n, const std::string& name, std::mt19937_64& rng, bool zero) {
  if (zero || n.shape.size() == 1) {
    std::fill(n.value.begin(), n.value.end(), 0.0);
    return;
  }
  const double a = std::sqrt(6.0 / (n.shape[0] + n.shape[1]));
  std::uniform_real_distribution<double> u(-a, a);
  for (double& v : n.value) v = static_cast<float>(u(rng));
  (void)name;
}

}  // namespace

void ModelConfig::validate() const {
  if (channels < 1 || dim < 4 || heads < 1 || blocks < 0 || mlp_ratio < 1 || time_dim < 2) {
    throw InvalidArgument("ModelConfig: sizes must be positive");
  }
  if (dim % heads) throw InvalidArgument("ModelConfig: dim must be divisible by heads");
  if (dim % 4) throw InvalidArgument("ModelConfig: dim must be a multiple of 4");
  if (time_dim % 2) throw InvalidArgument("ModelConfig: time_dim must be even");
}

VelocityModel::VelocityModel(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  build(seed);
}

void VelocityModel::add_param(const std::string& name, std::vector<int> shape) {
  const size_t n = Tensor::count(shape);
  index_[name] = params_.size();
  params_.emplace_back(name, parameter(std::move(shape), std::vector<double>(n, 0.0)));
}

void VelocityModel::build(uint64_t seed) {
  const int d = cfg_.dim, c = cfg_.channels, r = cfg_.mlp_ratio * d;
  auto lin = [&](const std::string& name, int din, int dout) {
    add_param(name + ".w", {din, dout});
    add_param(name + ".b", {dout});
  };
  lin("embed", 4 * c, d);
  lin("ray_embed", 24, d);
  lin("time.fc1", cfg_.time_dim, d);
  lin("time.fc2", d, d);
  for (int b = 0; b < cfg_.blocks; ++b) {
    const std::string pre = "block" + std::to_string(b);
    lin(pre + ".ada", d, 6 * d);
    lin(pre + ".qkv1", d, 3 * d);
    lin(pre + ".proj1", d, d);
    lin(pre + ".mv_in", 2 * d, d);
    lin(pre + ".qkv2", d, 3 * d);
    lin(pre + ".proj2", d, d);
    lin(pre + ".mv_out", d, d);
    lin(pre + ".fc1", d, r);
    lin(pre + ".fc2", r, d);
  }
  lin("final.ada", d, 2 * d);
  lin("final.out", d, 4 * c);
  std::mt19937_64 rng(seed);
  for (auto& [name, v] : params_) init_param(*v, name, rng, zero_initialised(name));
}

void VelocityModel::randomize_all(uint64_t seed, bool keep_multiview_zero) {
  std::mt19937_64 rng(seed);
  for (auto& [name, v] : params_) {
    const bool zero = keep_multiview_zero && multiview_output(name);
    if (zero) {
      std::fill(v->value.begin(), v->value.end(), 0.0);
      continue;
    }
    const double a = v->shape.size() == 2 ? std::sqrt(6.0 / (v->shape[0] + v->shape[1])) : 0.1;
    std::uniform_real_distribution<double> u(-a, a);
    for (double& x : v->value) x = static_cast<float>(u(rng));
  }
}

Var VelocityModel::p(const std::string& name) const { return params_.at(index_.at(name)).second; }

size_t VelocityModel::parameter_count() const {
  size_t n = 0;
  for (const auto& [name, v] : params_) n += v->size();
  return n;
}

void VelocityModel::zero_grad() {
  for (auto& [name, v] : params_) v->grad.assign(v->value.size(), 0.0);
}

Var VelocityModel::forward(const ModelInput& in, bool use_multiview) const {
  const int c = cfg_.channels, d = cfg_.dim;
  if (in.targets.shape.size() != 4 || in.targets.shape[3] != c) throw ShapeMismatch("forward: targets must be [N, h, w, C]");
  const int n = in.targets.shape[0], h = in.targets.shape[1], w = in.targets.shape[2];
  if (n < 1) throw ShapeMismatch("forward: at least one target frame");
  int m = 0;
  if (!in.sources.shape.empty() && in.sources.size() > 0) {
    if (in.sources.shape.size() != 4 || in.sources.shape[1] != h || in.sources.shape[2] != w || in.sources.shape[3] != c) {
      throw ShapeMismatch("forward: sources must match the target frame shape");
    }
    m = in.sources.shape[0];
  }
  const int f = n + m;
  if (in.raymaps.shape != std::vector<int>{f, h, w, 6}) throw ShapeMismatch("forward: raymaps must be [N + M, h, w, 6]");
  if (static_cast<int>(in.indices.size()) != f) throw ShapeMismatch("forward: one view index per frame");
  if (static_cast<int>(in.t.size()) != n) throw ShapeMismatch("forward: one t per target frame");
  if (h % 2 || w % 2) throw OddDimensions("forward: latent height and width must be even");
  const int ptok = (h / 2) * (w / 2);

  // all frames, targets first
  Tensor frames({f, h, w, c});
  std::copy(in.targets.data.begin(), in.targets.data.end(), frames.data.begin());
  if (m > 0) std::copy(in.sources.data.begin(), in.sources.data.end(), frames.data.begin() + in.targets.size());

  Var x = linear(patchify(constant(frames)), p("embed.w"), p("embed.b"));
  const Tensor pos = positional_encoding_2d(h / 2, w / 2, d);
  Tensor pos_all({f * ptok, d});
  for (int i = 0; i < f; ++i) std::copy(pos.data.begin(), pos.data.end(), pos_all.data.begin() + static_cast<size_t>(i) * pos.size());
  x = add(x, constant(pos_all));

  const Var ray = linear(patchify(constant(in.raymaps)), p("ray_embed.w"), p("ray_embed.b"));
  Tensor gamma({f, d});
  for (int i = 0; i < f; ++i) {
    const auto e = view_index_encoding(in.indices[i], d);
    std::copy(e.begin(), e.end(), gamma.data.begin() + static_cast<size_t>(i) * d);
  }
  const Var gamma_v = constant(gamma);

  Tensor temb({f, cfg_.time_dim});
  for (int i = 0; i < f; ++i) {
    const double t = i < n ? in.t[i] : 1.0;
    const auto e = sinusoidal_encoding(1000.0 * t, cfg_.time_dim);
    std::copy(e.begin(), e.end(), temb.data.begin() + static_cast<size_t>(i) * cfg_.time_dim);
  }
  Var cond = linear(silu(linear(constant(temb), p("time.fc1.w"), p("time.fc1.b"))), p("time.fc2.w"), p("time.fc2.b"));
  const Var cs = silu(cond);

  auto qkv_attention = [&](const Var& hin, const std::string& qkv, const std::string& proj, int group) {
    const Var y = linear(hin, p(qkv + ".w"), p(qkv + ".b"));
    const Var a = attention(slice_cols(y, 0, d), slice_cols(y, d, 2 * d), slice_cols(y, 2 * d, 3 * d), cfg_.heads, group);
    return linear(a, p(proj + ".w"), p(proj + ".b"));
  };

  for (int b = 0; b < cfg_.blocks; ++b) {
    const std::string pre = "block" + std::to_string(b);
    const Var mod = linear(cs, p(pre + ".ada.w"), p(pre + ".ada.b"));
    auto chunk = [&](int k) { return slice_cols(mod, k * d, (k + 1) * d); };

    Var hv = modulate(layer_norm(x), chunk(0), chunk(1), ptok);
    x = add(x, gate(qkv_attention(hv, pre + ".qkv1", pre + ".proj1", ptok), chunk(2), ptok));

    if (use_multiview) {
      Var mv = add_rows(x, gamma_v, ptok);
      mv = linear(concat_cols(mv, ray), p(pre + ".mv_in.w"), p(pre + ".mv_in.b"));
      mv = layer_norm(mv);
      mv = qkv_attention(mv, pre + ".qkv2", pre + ".proj2", f * ptok);
      x = add(x, linear(mv, p(pre + ".mv_out.w"), p(pre + ".mv_out.b")));
    }

    Var hf = modulate(layer_norm(x), chunk(3), chunk(4), ptok);
    hf = linear(gelu(linear(hf, p(pre + ".fc1.w"), p(pre + ".fc1.b"))), p(pre + ".fc2.w"), p(pre + ".fc2.b"));
    x = add(x, gate(hf, chunk(5), ptok));
  }

  const Var fmod = linear(cs, p("final.ada.w"), p("final.ada.b"));
  Var out = modulate(layer_norm(x), slice_cols(fmod, 0, d), slice_cols(fmod, d, 2 * d), ptok);
  out = linear(out, p("final.out.w"), p("final.out.b"));
  return unpatchify(slice_rows(out, 0, n * ptok), n, h, w, c);
}

Tensor VelocityModel::predict(const ModelInput& in, bool use_multiview) const {
  NoGradGuard ng;
  return to_tensor(forward(in, use_multiview));
}

bool VelocityModel::operator==(const VelocityModel& o) const {
  if (!(cfg_ == o.cfg_) || params_.size() != o.params_.size()) return false;
  for (size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].first != o.params_[i].first) return false;
    if (params_[i].second->shape != o.params_[i].second->shape) return false;
    if (params_[i].second->value != o.params_[i].second->value) return false;
  }
  return true;
}

namespace {

constexpr char kMagic[8] = {'F', 'L', 'W', 'R', 'N', 'E', 'T', '1'};

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::vector<char> buf) : buf_(std::move(buf)) {}
  template <typename T>
  T get(const char* what) {
    if (pos_ + sizeof(T) > buf_.size()) throw FormatError(std::string("truncated checkpoint reading ") + what, pos_);
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str(size_t n) {
    if (pos_ + n > buf_.size()) throw FormatError("truncated checkpoint reading a name", pos_);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  size_t pos() const { return pos_; }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::vector<char> buf_;
  size_t pos_ = 0;
};

}  // namespace

void VelocityModel::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path);
  os.write(kMagic, 8);
  for (int v : {cfg_.channels, cfg_.dim, cfg_.heads, cfg_.blocks, cfg_.mlp_ratio, cfg_.time_dim}) put<int32_t>(os, v);
  put<uint32_t>(os, static_cast<uint32_t>(params_.size()));
  for (const auto& [name, v] : params_) {
    put<uint32_t>(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint32_t>(os, static_cast<uint32_t>(v->shape.size()));
    for (int s : v->shape) put<int32_t>(os, s);
    for (double x : v->value) put<float>(os, static_cast<float>(x));
  }
  if (!os) throw IoError("write failed: " + path);
}

VelocityModel VelocityModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  Reader r(std::vector<char>((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>()));
  for (int i = 0; i < 8; ++i) {
    if (r.get<char>("magic") != kMagic[i]) throw FormatError("bad checkpoint magic", 0);
  }
  ModelConfig cfg;
  cfg.channels = r.get<int32_t>("config");
  cfg.dim = r.get<int32_t>("config");
  cfg.heads = r.get<int32_t>("config");
  cfg.blocks = r.get<int32_t>("config");
  cfg.mlp_ratio = r.get<int32_t>("config");
  cfg.time_dim = r.get<int32_t>("config");
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(std::string("invalid model config: ") + e.what(), 8);
  }
  VelocityModel model(cfg, 0);
  const uint32_t count = r.get<uint32_t>("parameter count");
  if (count != model.params_.size()) throw FormatError("parameter count does not match the config", r.pos() - 4);
  for (auto& [name, v] : model.params_) {
    const size_t at = r.pos();
    const std::string stored = r.str(r.get<uint32_t>("name length"));
    if (stored != name) throw FormatError("unexpected parameter " + stored, at);
    const uint32_t nd = r.get<uint32_t>("rank");
    std::vector<int> shape;
    for (uint32_t k = 0; k < nd; ++k) shape.push_back(r.get<int32_t>("shape"));
    if (shape != v->shape) throw FormatError("shape mismatch for " + name, at);
    for (double& x : v->value) x = r.get<float>("values");
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint", r.pos());
  return model;
}

std::vector<int> default_indices(int frames) {
  std::vector<int> idx(frames);
  for (int i = 0; i < frames; ++i) idx[i] = frames == 1 ? 0 : static_cast<int>(std::lround(1000.0 * i / (frames - 1)));
  return idx;
}

Tensor integrate(const VelocityModel& model, const flow::FlowBatch& batch, int n_steps) {
  ModelInput in;
  in.sources = batch.cond.sources;
  in.raymaps = batch.cond.raymaps;
  in.indices = batch.cond.indices.empty() ? default_indices(batch.cond.raymaps.frames()) : batch.cond.indices;
  const int n = batch.z0.frames();
  flow::VelocityFn fn = [&](const Tensor& z, double t) {
    in.targets = z;
    in.t.assign(n, t);
    return model.predict(in);
  };
  return flow::integrate_euler(fn, batch.z0, n_steps);
}

}  // namespace splatflow::nn
