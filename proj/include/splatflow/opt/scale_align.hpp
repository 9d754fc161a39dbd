#pragma once

#include <vector>

#include "splatflow/core/image.hpp"

namespace splatflow::opt {

/// Minimiser of Σ W |β D - D̂| over β > 0, where D are reconstruction depths
/// and D̂ monocular depths. Substituting r = D̂ / D gives Σ (W D) |β - r|, so
/// the answer is the weighted median of r with weights W D (lower median on
/// ties). Pixels with W <= 0, D <= 0 or non-finite values are ignored.
/// Throws NoValidPixels when nothing remains.
double align_metric_scale(const std::vector<ImageBuffer>& recon_depths, const std::vector<ImageBuffer>& mono_depths,
                          const std::vector<ImageBuffer>& confidences);

/// The objective above, for checking.
double scale_objective(double beta, const std::vector<ImageBuffer>& recon_depths,
                       const std::vector<ImageBuffer>& mono_depths, const std::vector<ImageBuffer>& confidences);

}  // namespace splatflow::opt
