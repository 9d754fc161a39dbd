#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "splatflow/core/gaussian.hpp"

namespace splatflow::pipeline {

struct ViewMetrics {
  int view_id = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double coverage = 1.0;
};

/// Undefined metric values (no covered pixels) are NaN.
struct MetricsReport {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
  double coverage = 1.0;
  size_t primitive_count = 0;

  void write_csv(std::ostream& os) const;
  void write_csv(const std::string& path) const;
};

/// PSNR = 10 log10(1 / MSE) capped at 99 dB, SSIM as in the optimiser.
/// With a threshold, coverage is the share of pixels whose rendered alpha is
/// at least the threshold and both metrics use only those pixels (SSIM map
/// averaged over them). Without one, coverage is 1 and all pixels count.
/// Means skip views whose metrics are undefined.
MetricsReport evaluate(const GaussianScene& scene, const std::vector<CameraView>& test_views,
                       std::optional<double> opacity_threshold = std::nullopt);

}  // namespace splatflow::pipeline
