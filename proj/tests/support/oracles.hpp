#pragma once

#include <functional>
#include <vector>

#include "splatflow/core/camera.hpp"
#include "splatflow/core/image.hpp"

namespace splatflow::testing {

/// Real spherical harmonic Y_lm (Condon-Shortley phase) from associated
/// Legendre polynomials in spherical coordinates.
double sh_textbook(int l, int m, const Vec3& dir);

/// Golden-section minimisation of a unimodal function on [lo, hi].
double golden_section_min(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12);

/// Central finite difference df/dx.
double central_diff(const std::function<double(double)>& f, double x, double h);

/// Relative error with an absolute floor: |a - b| / max(|a|, |b|, floor).
double rel_err(double a, double b, double floor = 1e-6);

/// SSIM by explicit 11x11 window sums per pixel (2-D Gaussian weights,
/// out-of-image samples read as zero), averaged over pixels and channels.
double ssim_direct(const ImageBuffer& a, const ImageBuffer& b);

}  // namespace splatflow::testing
