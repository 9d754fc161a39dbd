#include "splatflow/opt/scale_align.hpp"

#include <algorithm>
#include <cmath>

#include "splatflow/core/error.hpp"

namespace splatflow::opt {

namespace {

void check_inputs(const std::vector<ImageBuffer>& d, const std::vector<ImageBuffer>& m,
                  const std::vector<ImageBuffer>& w) {
  if (d.size() != m.size() || d.size() != w.size()) throw ShapeMismatch("align_metric_scale: list sizes differ");
  for (size_t i = 0; i < d.size(); ++i) {
    require_same_shape(d[i], m[i], "align_metric_scale");
    require_same_shape(d[i], w[i], "align_metric_scale");
  }
}

bool usable(double d, double m, double w) { return w > 0.0 && d > 0.0 && std::isfinite(d) && std::isfinite(m); }

}  // namespace

double align_metric_scale(const std::vector<ImageBuffer>& recon_depths, const std::vector<ImageBuffer>& mono_depths,
                          const std::vector<ImageBuffer>& confidences) {
  check_inputs(recon_depths, mono_depths, confidences);
  std::vector<std::pair<double, double>> rw;  // (ratio, weight)
  double total = 0.0;
  for (size_t i = 0; i < recon_depths.size(); ++i) {
    for (size_t k = 0; k < recon_depths[i].size(); ++k) {
      const double d = recon_depths[i].data[k], m = mono_depths[i].data[k], w = confidences[i].data[k];
      if (!usable(d, m, w)) continue;
      rw.emplace_back(m / d, w * d);
      total += w * d;
    }
  }
  if (rw.empty() || !(total > 0.0)) throw NoValidPixels("align_metric_scale: no pixel with positive weight");
  std::sort(rw.begin(), rw.end());
  double acc = 0.0;
  for (const auto& [r, w] : rw) {
    acc += w;
    if (acc >= 0.5 * total) return r;
  }
  return rw.back().first;
}

double scale_objective(double beta, const std::vector<ImageBuffer>& recon_depths,
                       const std::vector<ImageBuffer>& mono_depths, const std::vector<ImageBuffer>& confidences) {
  check_inputs(recon_depths, mono_depths, confidences);
  double s = 0.0;
  for (size_t i = 0; i < recon_depths.size(); ++i) {
    for (size_t k = 0; k < recon_depths[i].size(); ++k) {
      const double d = recon_depths[i].data[k], m = mono_depths[i].data[k], w = confidences[i].data[k];
      if (!usable(d, m, w)) continue;
      s += w * std::abs(beta * d - m);
    }
  }
  return s;
}

}  // namespace splatflow::opt
