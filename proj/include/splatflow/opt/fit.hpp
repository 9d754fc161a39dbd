#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "splatflow/opt/losses.hpp"
#include "splatflow/opt/optimizer.hpp"

namespace splatflow::opt {

enum class LossKind { Source, Target };

/// A camera with its image, supervised either by loss_gs (source) or loss_tgt (target).
struct TrainView {
  CameraView view;
  LossKind kind = LossKind::Source;
};

struct LogRow {
  int step = 0;
  double loss = 0.0;
  double psnr = 0.0;
  int primitive_count = 0;
};

struct FitLog {
  std::vector<LogRow> rows;
  std::vector<AdcEvent> adc_events;

  void write_csv(std::ostream& os) const;
  void write_csv(const std::string& path) const;
};

/// Loss of `scene` on one training view with the view's loss kind.
double view_loss(const GaussianScene& scene, const TrainView& v, const OptimizerConfig& cfg,
                 const PerceptualHook& hook = {});

struct ViewSetMetrics {
  double loss = 0.0;  // mean over views
  double psnr = 0.0;  // mean over views
};
ViewSetMetrics evaluate_views(const GaussianScene& scene, const std::vector<TrainView>& views,
                              const OptimizerConfig& cfg, const PerceptualHook& hook = {});

/// Optimises every primitive parameter for cfg.total_steps steps, one
/// uniformly drawn view per step. Density control runs every adc_interval
/// steps in (warmup_steps, adc_stop_step]. Throws EmptyViewSet without views.
GaussianScene fit(GaussianScene scene, const std::vector<TrainView>& views, const OptimizerConfig& cfg,
                  FitLog* log = nullptr, const PerceptualHook& hook = {});

}  // namespace splatflow::opt
