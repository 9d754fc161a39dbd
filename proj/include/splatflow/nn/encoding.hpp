#pragma once

#include <vector>

#include "splatflow/core/camera.hpp"
#include "splatflow/core/tensor.hpp"

namespace splatflow::nn {

/// Interleaved sin/cos features of a scalar: entry 2k is sin(x ω_k) and
/// 2k + 1 is cos(x ω_k), with ω_k = 10000^(-2k / dim). `dim` must be even.
std::vector<double> sinusoidal_encoding(double x, int dim);

/// γ(i) for a view index 0 <= i <= 10^6.
std::vector<double> view_index_encoding(int i, int dim);

/// [ph * pw, dim] 2D encoding of patch positions: the first half of the
/// features encodes the row, the second half the column.
Tensor positional_encoding_2d(int ph, int pw, int dim);

/// H x W x 6 Plücker map of view i expressed in the frame of reference view j:
/// o = R_jᵀ (t_i - t_j), d = normalize(R_jᵀ R_i K_i⁻¹ p'), r = (o × d, d).
/// Intrinsics are rescaled from the camera size to H x W with pixel centres
/// preserved.
ImageBuffer compute_raymap(const CameraView& view_i, const CameraView& ref_j, int height, int width);

/// Index of the view whose centre is closest to the mean of all centres
/// (lowest index on ties).
int reference_view(const std::vector<CameraView>& views);

/// Stacks ray maps of `views` relative to `ref` into [F, H, W, 6].
Tensor raymap_stack(const std::vector<CameraView>& views, const CameraView& ref, int height, int width);

/// Non-recording wrappers of the patchify ops.
Tensor patchify(const Tensor& x);
Tensor unpatchify(const Tensor& tokens, int frames, int height, int width, int channels);

}  // namespace splatflow::nn
