#include "splatflow/pipeline/config.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>

#include "splatflow/core/error.hpp"

namespace splatflow::pipeline {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <typename T>
T parse_number(const std::string& v) {
  std::istringstream ss(v);
  T out{};
  ss >> out;
  if (!ss || !(ss >> std::ws).eof()) throw ConfigError("cannot parse '" + v + "' as a number");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("cannot parse '" + v + "' as a boolean");
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
ConfigField num(const std::string& sec, const std::string& key, T& ref, const std::string& doc) {
  return {sec, key, doc, [&ref](const std::string& v) { ref = parse_number<T>(v); },
          [&ref]() {
            if constexpr (std::is_floating_point_v<T>) return fmt(ref);
            else return std::to_string(ref);
          }};
}

ConfigField flag(const std::string& sec, const std::string& key, bool& ref, const std::string& doc) {
  return {sec, key, doc, [&ref](const std::string& v) { ref = parse_bool(v); },
          [&ref]() { return std::string(ref ? "true" : "false"); }};
}

}  // namespace

PipelineConfig::PipelineConfig() {
  scene.primitives = 500;
  scene.scale_bias = -0.5;
  // short initial fit, longer refit
  recon.fit.total_steps = 500;
  recon.fit.adc_stop_step = 333;
  recon.fit.log_interval = 50;
  recon.fit.max_primitives = 6000;
  refine.recon = recon;
  refine.recon.fit.total_steps = 1500;
  refine.recon.fit.adc_stop_step = 1000;
  flow.model.dim = 64;
  flow.model.blocks = 2;
  flow.model.heads = 4;
  flow.train.steps = 2000;
  flow.train.batch_size = 8;
  flow.train.lr = 1e-3;
}

void PipelineConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(scene.primitives >= 1, "scene.primitives must be >= 1");
  need(scene.views >= 2, "scene.views must be >= 2");
  need(scene.width > 0 && scene.height > 0 && scene.focal > 0, "scene image size and focal must be positive");
  need(input_views >= 2 && input_views <= scene.views, "input_views must be in [2, scene.views]");
  need(recon.pixel_stride >= 1 && refine.recon.pixel_stride >= 1, "pixel_stride must be >= 1");
  need(flow.glue.latent_factor >= 1 && scene.width % flow.glue.latent_factor == 0 &&
           scene.height % flow.glue.latent_factor == 0,
       "latent_factor must divide the image size");
  need(flow.glue.euler_steps >= 1, "euler_steps must be >= 1");
  need(refine.n_refs >= 0, "n_refs must be >= 0");
  for (int s : flow.sparsity_levels) need(s >= 2, "sparsity levels must be >= 2");
  try {
    recon.fit.validate();
    refine.recon.fit.validate();
    flow.model.validate();
    flow.train.time.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

std::vector<ConfigField> config_fields(PipelineConfig& c) {
  std::vector<ConfigField> f{
      num("run", "seed", c.seed, "master seed"),
      num("run", "input_views", c.input_views, "equally spaced input views; the rest are held out"),
      num("run", "eval_opacity_threshold", c.eval_opacity_threshold, "coverage threshold for eval; < 0 disables"),
      num("scene", "primitives", c.scene.primitives, "ground-truth primitives"),
      num("scene", "scale_bias", c.scene.scale_bias, "object log-scale offset (negative: finer detail)"),
      {"scene", "trajectory", "orbit or spline",
       [&c](const std::string& v) {
         if (v == "orbit") c.scene.trajectory = TrajectoryKind::Orbit;
         else if (v == "spline") c.scene.trajectory = TrajectoryKind::Spline;
         else throw ConfigError("trajectory must be orbit or spline");
       },
       [&c]() { return std::string(c.scene.trajectory == TrajectoryKind::Orbit ? "orbit" : "spline"); }},
      num("scene", "views", c.scene.views, "cameras on the trajectory"),
      num("scene", "width", c.scene.width, "image width"),
      num("scene", "height", c.scene.height, "image height"),
      num("scene", "focal", c.scene.focal, "focal length in pixels"),
      num("scene", "radius", c.scene.radius, "camera distance from the centre"),
      num("scene", "elevation", c.scene.elevation, "camera height / radius"),
      num("scene", "depth_noise", c.scene.depth_noise, "log-normal sigma of the noisy depth"),
      num("scene", "depth_scale", c.scene.depth_scale, "unknown scale of the noisy depth"),
      num("scene", "track_fraction", c.scene.track_fraction, "share of pixels with sparse metric depth"),
  };
  auto add_recon = [&f](const std::string& sec, ReconConfig& r) {
    auto& o = r.fit;
    f.push_back(num(sec, "steps", o.total_steps, "optimisation steps"));
    f.push_back(num(sec, "warmup_steps", o.warmup_steps, "no density control before this step"));
    f.push_back(num(sec, "adc_stop_step", o.adc_stop_step, "last density-control step; 0 disables"));
    f.push_back(num(sec, "adc_interval", o.adc_interval, "steps between density-control passes"));
    f.push_back(num(sec, "lr_position", o.lr.position, "initial position lr (times spatial scale)"));
    f.push_back(num(sec, "lr_position_final", o.lr.position_final, "final position lr"));
    f.push_back(num(sec, "lr_scale", o.lr.log_scale, "log-scale lr"));
    f.push_back(num(sec, "lr_rotation", o.lr.rotation, "rotation lr"));
    f.push_back(num(sec, "lr_opacity", o.lr.opacity, "opacity lr"));
    f.push_back(num(sec, "lr_sh_dc", o.lr.sh_dc, "base colour lr"));
    f.push_back(num(sec, "lr_sh_rest", o.lr.sh_rest, "higher SH lr"));
    f.push_back(num(sec, "ssim_weight", o.ssim_weight, "lambda in loss_gs"));
    f.push_back(num(sec, "tgt_ssim_weight", o.tgt_ssim_weight, "lambda' in loss_tgt"));
    f.push_back(num(sec, "lpips_weight", o.lpips_weight, "perceptual weight (no-op without a hook)"));
    f.push_back(num(sec, "densify_grad_threshold", o.densify_grad_threshold, "AbsGrad threshold"));
    f.push_back(num(sec, "prune_opacity", o.prune_opacity, "prune below this opacity"));
    f.push_back(num(sec, "percent_dense", o.percent_dense, "clone/split size boundary"));
    f.push_back(num(sec, "max_primitives", o.max_primitives, "density-control cap"));
    f.push_back(num(sec, "log_interval", o.log_interval, "fit log period"));
    f.push_back(num(sec, "fit_seed", o.seed, "view sampling seed"));
    f.push_back({sec, "init", "depth or random",
                 [&r](const std::string& v) {
                   if (v == "depth") r.init = InitKind::Depth;
                   else if (v == "random") r.init = InitKind::Random;
                   else throw ConfigError("init must be depth or random");
                 },
                 [&r]() { return std::string(r.init == InitKind::Depth ? "depth" : "random"); }});
    f.push_back(num(sec, "pixel_stride", r.pixel_stride, "unprojection stride"));
    f.push_back(num(sec, "voxel_size", r.voxel_size, "dedup voxel; <= 0 disables"));
    f.push_back(num(sec, "k_neighbors", r.k_neighbors, "covisibility neighbours"));
    f.push_back(num(sec, "init_opacity", r.init_opacity, "initial primitive opacity"));
  };
  add_recon("recon", c.recon);
  add_recon("refine", c.refine.recon);
  f.push_back(num("refine", "n_refs", c.refine.n_refs, "reference source views per target"));
  f.push_back(flag("refine", "target_loss", c.refine.target_loss, "loss_tgt on generated views (else loss_gs)"));
  f.push_back(flag("refine", "reinit", c.refine.reinit, "add generated-view points to the initialisation"));
  f.push_back(num("plan", "spline_targets", c.refine.plan.spline_targets, "targets along the source spline"));
  f.push_back(num("plan", "sphere_targets", c.refine.plan.sphere_targets, "targets on spheres around sources"));
  f.push_back(flag("plan", "closed_loop", c.refine.plan.closed_loop, "spline returns to the first source"));
  f.push_back(num("plan", "candidates", c.refine.plan.sphere.n_candidates, "Fibonacci candidates per sphere"));
  f.push_back(num("plan", "radius_min", c.refine.plan.sphere.radius_min, "sphere radius lower bound"));
  f.push_back(num("plan", "radius_max", c.refine.plan.sphere.radius_max, "sphere radius upper bound"));
  f.push_back(num("plan", "perturb_max_deg", c.refine.plan.sphere.perturb_max_deg, "max yaw/pitch change"));
  f.push_back(num("plan", "near_fraction_max", c.refine.plan.near_fraction_max, "reject above this near share"));
  f.push_back(num("plan", "min_points", c.refine.plan.min_points_in_frustum, "reject below this many points"));
  f.push_back(num("plan", "min_point_opacity", c.refine.plan.min_point_opacity, "points used by the filter"));
  f.push_back(num("plan", "seed", c.refine.plan.seed, "sphere sampling seed"));
  auto& m = c.flow.model;
  f.push_back(num("flow", "dim", m.dim, "token width"));
  f.push_back(num("flow", "heads", m.heads, "attention heads"));
  f.push_back(num("flow", "blocks", m.blocks, "transformer blocks"));
  f.push_back(num("flow", "mlp_ratio", m.mlp_ratio, "feed-forward expansion"));
  f.push_back(num("flow", "time_dim", m.time_dim, "sinusoidal time features"));
  auto& t = c.flow.train;
  f.push_back(num("flow", "steps", t.steps, "training steps"));
  f.push_back(num("flow", "batch_size", t.batch_size, "items per step"));
  f.push_back(num("flow", "lr", t.lr, "peak learning rate"));
  f.push_back(num("flow", "warmup_steps", t.warmup_steps, "linear lr warm-up"));
  f.push_back(num("flow", "final_lr_ratio", t.final_lr_ratio, "cosine floor / peak"));
  f.push_back(num("flow", "grad_clip", t.grad_clip, "global gradient norm clip"));
  f.push_back(num("flow", "train_seed", t.seed, "training seed"));
  f.push_back(num("flow", "time_location", t.time.location, "logit-normal location"));
  f.push_back(num("flow", "time_scale", t.time.scale, "logit-normal scale"));
  f.push_back(num("flow", "latent_factor", c.flow.glue.latent_factor, "image -> latent downsampling"));
  f.push_back(num("flow", "euler_steps", c.flow.glue.euler_steps, "integration steps"));
  f.push_back({"flow", "sparsity_levels", "comma-separated input counts for pair generation",
               [&c](const std::string& v) {
                 std::vector<int> out;
                 std::stringstream ss(v);
                 std::string item;
                 while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(trim(item)));
                 c.flow.sparsity_levels = out;
               },
               [&c]() {
                 std::string s;
                 for (size_t i = 0; i < c.flow.sparsity_levels.size(); ++i)
                   s += (i ? "," : "") + std::to_string(c.flow.sparsity_levels[i]);
                 return s;
               }});
  f.push_back(num("flow", "pair_scenes", c.flow.pair_scenes, "scenes used for pair generation"));
  f.push_back(num("flow", "pair_seed", c.flow.pair_seed, "seed of the first pair scene"));
  return f;
}

namespace {

void set_field(PipelineConfig& cfg, const std::string& section, const std::string& key, const std::string& value,
               const std::string& where) {
  for (auto& f : config_fields(cfg)) {
    if (f.section == section && f.key == key) {
      try {
        f.set(value);
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + section + "." + key + ": " + e.what());
      }
      return;
    }
  }
  throw ConfigError(where + ": unknown key " + section + "." + key);
}

}  // namespace

void apply_config_text(PipelineConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    set_field(cfg, section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), where);
  }
}

void apply_config_file(PipelineConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  apply_config_text(cfg, ss.str(), path);
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw ConfigError("override must look like section.key=value: " + assignment);
  set_field(cfg, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
            trim(assignment.substr(eq + 1)), "override");
}

void print_config(PipelineConfig& cfg, std::ostream& os) {
  std::string section;
  for (const auto& f : config_fields(cfg)) {
    if (f.section != section) {
      if (!section.empty()) os << '\n';
      section = f.section;
      os << '[' << section << "]\n";
    }
    os << "# " << f.doc << '\n' << f.key << " = " << f.get() << '\n';
  }
}

}  // namespace splatflow::pipeline
