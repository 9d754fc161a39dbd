#include "splatflow/opt/fit.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "splatflow/core/error.hpp"

namespace splatflow::opt {

void FitLog::write_csv(std::ostream& os) const {
  os << "step,loss,psnr,primitive_count\n";
  os.precision(9);
  for (const auto& r : rows) os << r.step << ',' << r.loss << ',' << r.psnr << ',' << r.primitive_count << '\n';
}

void FitLog::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  write_csv(f);
}

namespace {

double loss_for(const TrainView& v, const ImageBuffer& render, const OptimizerConfig& cfg,
                const PerceptualHook& hook, ImageBuffer* grad) {
  if (v.kind == LossKind::Source) return loss_gs(render, v.view.image, cfg, grad);
  return loss_tgt(render, v.view.image, cfg, hook, grad);
}

render::RenderSettings settings_for(const OptimizerConfig& cfg) {
  render::RenderSettings s;
  s.workers = cfg.workers;
  return s;
}

}  // namespace

double view_loss(const GaussianScene& scene, const TrainView& v, const OptimizerConfig& cfg,
                 const PerceptualHook& hook) {
  const auto out = render::rasterize(scene, v.view, settings_for(cfg));
  return loss_for(v, out.color, cfg, hook, nullptr);
}

ViewSetMetrics evaluate_views(const GaussianScene& scene, const std::vector<TrainView>& views,
                              const OptimizerConfig& cfg, const PerceptualHook& hook) {
  if (views.empty()) throw EmptyViewSet("evaluate_views: no views");
  ViewSetMetrics m;
  for (const auto& v : views) {
    const auto out = render::rasterize(scene, v.view, settings_for(cfg));
    m.loss += loss_for(v, out.color, cfg, hook, nullptr);
    m.psnr += psnr(out.color, v.view.image);
  }
  m.loss /= views.size();
  m.psnr /= views.size();
  return m;
}

GaussianScene fit(GaussianScene scene, const std::vector<TrainView>& views, const OptimizerConfig& cfg, FitLog* log,
                  const PerceptualHook& hook) {
  cfg.validate();
  scene.validate();
  if (views.empty()) throw EmptyViewSet("fit: no training views");
  for (const auto& v : views) {
    if (v.view.image.height != v.view.height || v.view.image.width != v.view.width || v.view.image.channels != 3) {
      throw ShapeMismatch("fit: view image does not match the camera size");
    }
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<size_t> pick(0, views.size() - 1);
  SceneAdam adam(scene);
  AdcStats stats;
  stats.resize(scene.size());
  const auto settings = settings_for(cfg);
  const double lr0 = cfg.lr.position * cfg.spatial_lr_scale;
  const double lr1 = cfg.lr.position_final * cfg.spatial_lr_scale;

  for (int step = 1; step <= cfg.total_steps; ++step) {
    const TrainView& v = views[pick(rng)];
    const auto out = render::rasterize(scene, v.view, settings);
    ImageBuffer grad;
    const double loss = loss_for(v, out.color, cfg, hook, &grad);
    if (log && (step == 1 || step % cfg.log_interval == 0 || step == cfg.total_steps)) {
      log->rows.push_back({step, loss, psnr(out.color, v.view.image), static_cast<int>(scene.size())});
    }
    const auto g = render::rasterize_backward(scene, v.view, grad, settings);
    stats.accumulate(g, v.view);

    const double frac = cfg.total_steps > 1 ? double(step - 1) / double(cfg.total_steps - 1) : 0.0;
    const double pos_lr = (lr0 > 0.0 && lr1 > 0.0) ? std::exp((1.0 - frac) * std::log(lr0) + frac * std::log(lr1))
                                                   : lr0 * (1.0 - frac);
    adam.step(scene, g, cfg.lr, pos_lr);

    if (cfg.adc_stop_step > 0 && step > cfg.warmup_steps && step <= cfg.adc_stop_step &&
        step % cfg.adc_interval == 0) {
      const AdcEvent ev = densify_and_prune(scene, stats, adam, cfg, rng);
      if (log) log->adc_events.push_back(ev);
    }
  }
  return scene;
}

}  // namespace splatflow::opt
