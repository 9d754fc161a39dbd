// splatflow command line: scene generation, reconstruction, view planning,
// pair generation, flow training, refinement, evaluation and plots.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "json.hpp"
#include "splatflow/core/error.hpp"
#include "splatflow/core/io.hpp"
#include "splatflow/pipeline/config.hpp"
#include "splatflow/pipeline/metrics.hpp"
#include "splatflow/pipeline/pairs.hpp"
#include "splatflow/pipeline/refine.hpp"
#include "splatflow/pipeline/report.hpp"
#include "splatflow/render/rasterizer.hpp"

namespace fs = std::filesystem;
using namespace splatflow;
using namespace splatflow::pipeline;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  long long seed = -1;
};

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg;
  if (!c.config_path.empty()) apply_config_file(cfg, c.config_path);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed >= 0) cfg.seed = static_cast<uint64_t>(c.seed);
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "INI config file");
  app->add_option("--set", c.overrides, "override, section.key=value (repeatable)");
  app->add_option("--seed", c.seed, "master seed");
}

// Single writer for every run manifest.
void write_manifest(const fs::path& dir, const std::string& command, PipelineConfig& cfg,
                    const std::vector<std::string>& artifacts, const json& extra = json::object()) {
  json m;
  m["command"] = command;
  m["seed"] = cfg.seed;
  m["git_describe"] = git_describe();
  json conf = json::object();
  for (const auto& f : config_fields(cfg)) conf[f.section + "." + f.key] = f.get();
  m["config"] = conf;
  m["artifacts"] = artifacts;
  if (!extra.empty()) m["results"] = extra;
  std::ofstream f(dir / "manifest.json");
  if (!f) throw IoError("cannot write manifest in " + dir.string());
  f << m.dump(2) << '\n';
}

std::vector<InputView> inputs_of(const SyntheticScene& s, const PipelineConfig& cfg) {
  return select_views(s.views, make_split(s, cfg.input_views).inputs);
}

std::vector<CameraView> held_out_of(const SyntheticScene& s, const PipelineConfig& cfg) {
  std::vector<CameraView> out;
  for (const auto& v : select_views(s.views, make_split(s, cfg.input_views).held_out)) out.push_back(v.view);
  return out;
}

void write_ids(const fs::path& path, const std::vector<int>& ids) {
  std::ofstream f(path);
  for (int id : ids) f << id << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splatflow: sparse-view Gaussian splatting refinement with a conditional flow model"};
  app.require_subcommand(1);
  Common common;
  std::string out, scene_dir, recon_file, model_file, pairs_file, generator = "flow", csv, cameras, splat, title;
  double threshold = -1.0;

  auto* pc = app.add_subcommand("print-config", "print every config key with its value");
  add_common(pc, common);

  auto* gen = app.add_subcommand("gen-scene", "synthetic scene, trajectory and depth cues");
  add_common(gen, common);
  gen->add_option("--out", out, "output directory")->required();

  auto* rec = app.add_subcommand("reconstruct", "initial reconstruction from the input views");
  add_common(rec, common);
  rec->add_option("--scene", scene_dir, "scene directory")->required();
  rec->add_option("--out", out, "output directory")->required();

  auto* pv = app.add_subcommand("plan-views", "plan target poses around a reconstruction");
  add_common(pv, common);
  pv->add_option("--scene", scene_dir, "scene directory")->required();
  pv->add_option("--recon", recon_file, "reconstruction (.splat)")->required();
  pv->add_option("--out", out, "output directory")->required();

  auto* gp = app.add_subcommand("gen-pairs", "rendering / ground-truth pairs from fresh scenes");
  add_common(gp, common);
  gp->add_option("--out", out, "output directory")->required();

  auto* tf = app.add_subcommand("train-flow", "train the velocity model on pairs");
  add_common(tf, common);
  tf->add_option("--pairs", pairs_file, "pair file")->required();
  tf->add_option("--out", out, "output directory")->required();

  auto* rf = app.add_subcommand("refine", "generate target views and refit");
  add_common(rf, common);
  rf->add_option("--scene", scene_dir, "scene directory")->required();
  rf->add_option("--recon", recon_file, "initial reconstruction (.splat)")->required();
  rf->add_option("--model", model_file, "flow checkpoint (generator=flow)");
  rf->add_option("--generator", generator, "flow, identity or oracle")
      ->check(CLI::IsMember({"flow", "identity", "oracle"}));
  rf->add_option("--out", out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "PSNR / SSIM / coverage report");
  add_common(ev, common);
  ev->add_option("--splat", splat, "scene to evaluate (.splat)")->required();
  auto* ev_cams = ev->add_option("--cameras", cameras, "camera list with images");
  auto* ev_scene = ev->add_option("--scene", scene_dir, "scene directory: evaluate its held-out views");
  ev_cams->excludes(ev_scene);
  ev->add_option("--threshold", threshold, "coverage opacity threshold (overrides config)");
  ev->add_option("--out", csv, "CSV report")->required();

  auto* pl = app.add_subcommand("plot", "SVG line plot of a CSV log");
  pl->add_option("--csv", csv, "input CSV")->required();
  pl->add_option("--out", out, "output SVG")->required();
  pl->add_option("--title", title, "plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (pl->parsed()) {
      std::string xl;
      const auto series = read_csv_series(csv, &xl);
      std::ofstream f(out);
      if (!f) throw IoError("cannot write " + out);
      f << svg_line_plot(series, title.empty() ? fs::path(csv).filename().string() : title, xl);
      return 0;
    }
    PipelineConfig cfg = load_config(common);
    if (pc->parsed()) {
      print_config(cfg, std::cout);
      return 0;
    }
    if (ev->parsed()) {
      const GaussianScene s = load_scene(splat);
      std::vector<CameraView> views;
      if (!cameras.empty()) views = load_views(cameras);
      else if (!scene_dir.empty()) views = held_out_of(load_synthetic_scene(scene_dir), cfg);
      else throw ConfigError("eval needs --cameras or --scene");
      const double th = threshold >= 0.0 ? threshold : cfg.eval_opacity_threshold;
      const auto rep = evaluate(s, views, th >= 0.0 ? std::optional<double>(th) : std::nullopt);
      rep.write_csv(csv);
      std::cout << "psnr " << rep.mean_psnr << " ssim " << rep.mean_ssim << " coverage " << rep.coverage << '\n';
      return 0;
    }
    fs::create_directories(out);
    const fs::path dir(out);
    if (gen->parsed()) {
      const auto s = generate_synthetic_scene(cfg.seed, cfg.scene);
      save_synthetic_scene(s, dir);
      const auto split = make_split(s, cfg.input_views);
      write_ids(dir / "inputs.txt", split.inputs);
      write_ids(dir / "held_out.txt", split.held_out);
      write_manifest(dir, "gen-scene", cfg, {"gt.splat", "cameras.txt", "inputs.txt", "held_out.txt"});
    } else if (rec->parsed()) {
      const auto s = load_synthetic_scene(scene_dir);
      ReconConfig rc = cfg.recon;
      rc.fit.seed ^= cfg.seed;
      const auto r = initial_reconstruction(inputs_of(s, cfg), rc);
      save_scene(r.scene, dir / "recon.splat");
      r.log.write_csv((dir / "fit_log.csv").string());
      const auto m = evaluate(r.scene, held_out_of(s, cfg));
      write_manifest(dir, "reconstruct", cfg, {"recon.splat", "fit_log.csv"},
                     {{"beta", r.init.beta}, {"keyframes", r.init.keyframes}, {"primitives", r.scene.size()},
                      {"held_out_psnr", m.mean_psnr}, {"held_out_ssim", m.mean_ssim}});
    } else if (pv->parsed()) {
      const auto s = load_synthetic_scene(scene_dir);
      std::vector<CameraView> cams;
      for (const auto& v : inputs_of(s, cfg)) cams.push_back(v.view);
      const auto set = plan_targets(load_scene(recon_file), cams, cfg.refine.plan);
      plan::write_plan(set, (dir / "plan.txt").string());
      std::ofstream rej(dir / "rejections.txt");
      for (const auto& r : set.rejections) rej << r << '\n';
      write_manifest(dir, "plan-views", cfg, {"plan.txt", "rejections.txt"},
                     {{"targets", set.poses.size()}, {"rejected", set.rejections.size()}});
    } else if (gp->parsed()) {
      std::vector<std::string> warnings;
      const auto pairs = generate_training_pairs(cfg.scene, cfg.recon, cfg.flow, cfg.refine.n_refs, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
      save_pairs(pairs, (dir / "pairs.bin").string());
      write_manifest(dir, "gen-pairs", cfg, {"pairs.bin"}, {{"pairs", pairs.size()}, {"warnings", warnings}});
    } else if (tf->parsed()) {
      const auto pairs = load_pairs(pairs_file);
      nn::TrainResult tr;
      const auto model = train_flow_model(pairs, cfg.flow, &tr);
      model.save((dir / "model.bin").string());
      std::ofstream log(dir / "train_log.csv");
      log << "step,loss\n";
      log.precision(9);
      for (size_t i = 0; i < tr.loss_history.size(); ++i) log << i + 1 << ',' << tr.loss_history[i] << '\n';
      write_manifest(dir, "train-flow", cfg, {"model.bin", "train_log.csv"},
                     {{"pairs", pairs.size()}, {"final_loss", tr.loss_history.empty() ? 0.0 : tr.loss_history.back()}});
    } else if (rf->parsed()) {
      const auto s = load_synthetic_scene(scene_dir);
      const auto inputs = inputs_of(s, cfg);
      std::vector<CameraView> cams;
      for (const auto& v : inputs) cams.push_back(v.view);
      nn::VelocityModel model;
      ViewGenerator g;
      if (generator == "identity") {
        g = identity_generator();
      } else if (generator == "oracle") {
        g = oracle_generator(s.gt);
      } else {
        if (model_file.empty()) throw ConfigError("refine with generator=flow needs --model");
        model = nn::VelocityModel::load(model_file);
        g = flow_generator(model, cams, cfg.flow.glue);
      }
      RefineConfig rc = cfg.refine;
      rc.recon.fit.seed ^= cfg.seed;
      const auto r = refine_reconstruction(load_scene(recon_file), inputs, g, rc);
      save_scene(r.scene, dir / "refined.splat");
      r.log.write_csv((dir / "fit_log.csv").string());
      std::vector<CameraView> gen_views;
      for (const auto& v : r.generated) gen_views.push_back(v.view);
      save_views(gen_views, dir / "generated", "cameras.txt", "target_");
      const auto m = evaluate(r.scene, held_out_of(s, cfg));
      write_manifest(dir, "refine", cfg, {"refined.splat", "fit_log.csv", "generated/cameras.txt"},
                     {{"generator", generator}, {"targets", r.targets.poses.size()},
                      {"rejected", r.targets.rejections.size()}, {"primitives", r.scene.size()},
                      {"held_out_psnr", m.mean_psnr}, {"held_out_ssim", m.mean_ssim}});
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
