#include "splatflow/pipeline/metrics.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "splatflow/core/error.hpp"
#include "splatflow/opt/losses.hpp"
#include "splatflow/render/rasterizer.hpp"

namespace splatflow::pipeline {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double psnr_from_mse(double mse) {
  if (mse <= 1e-10) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

}  // namespace

void MetricsReport::write_csv(std::ostream& os) const {
  os.precision(9);
  os << "view_id,psnr,ssim,coverage\n";
  for (const auto& v : views) os << v.view_id << ',' << v.psnr << ',' << v.ssim << ',' << v.coverage << '\n';
  os << "mean," << mean_psnr << ',' << mean_ssim << ',' << coverage << '\n';
}

void MetricsReport::write_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  write_csv(f);
}

MetricsReport evaluate(const GaussianScene& scene, const std::vector<CameraView>& test_views,
                       std::optional<double> opacity_threshold) {
  MetricsReport rep;
  rep.primitive_count = scene.size();
  int defined = 0;
  double cov_sum = 0.0;
  rep.mean_psnr = rep.mean_ssim = 0.0;
  for (const auto& cam : test_views) {
    const auto out = render::rasterize(scene, cam);
    ImageBuffer map;
    const double whole_ssim = opt::ssim(out.color, cam.image, nullptr, &map);
    ViewMetrics m;
    m.view_id = cam.id;
    const size_t np = out.color.pixel_count();
    const int nc = out.color.channels;
    if (!opacity_threshold) {
      m.coverage = 1.0;
      m.psnr = psnr_from_mse(opt::mse_loss(out.color, cam.image));
      m.ssim = whole_ssim;
    } else {
      size_t covered = 0;
      double se = 0.0, ss = 0.0;
      for (size_t p = 0; p < np; ++p) {
        if (out.alpha.data[p] < *opacity_threshold) continue;
        ++covered;
        for (int c = 0; c < nc; ++c) {
          const double d = out.color.data[p * nc + c] - cam.image.data[p * nc + c];
          se += d * d;
          ss += map.data[p * nc + c];
        }
      }
      m.coverage = np ? static_cast<double>(covered) / np : 0.0;
      if (covered == 0) {
        m.psnr = m.ssim = kNaN;
      } else {
        m.psnr = psnr_from_mse(se / (covered * nc));
        m.ssim = ss / (covered * nc);
      }
    }
    cov_sum += m.coverage;
    if (!std::isnan(m.psnr)) {
      rep.mean_psnr += m.psnr;
      rep.mean_ssim += m.ssim;
      ++defined;
    }
    rep.views.push_back(m);
  }
  rep.coverage = test_views.empty() ? 0.0 : cov_sum / test_views.size();
  if (defined > 0) {
    rep.mean_psnr /= defined;
    rep.mean_ssim /= defined;
  } else {
    rep.mean_psnr = rep.mean_ssim = kNaN;
  }
  return rep;
}

}  // namespace splatflow::pipeline
