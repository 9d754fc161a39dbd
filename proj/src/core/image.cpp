#include "splatflow/core/image.hpp"

#include <string>

#include "splatflow/core/error.hpp"

namespace splatflow {

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(what) + ": " + std::to_string(a.height) + "x" +
                        std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
                        std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                        std::to_string(b.channels));
  }
}

ImageBuffer downsample(const ImageBuffer& img, int factor) {
  if (factor < 1 || img.height % factor != 0 || img.width % factor != 0) {
    throw InvalidArgument("downsample: image size not divisible by factor");
  }
  ImageBuffer out(img.height / factor, img.width / factor, img.channels);
  const double inv = 1.0 / (factor * factor);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        out.at(y / factor, x / factor, c) += img.at(y, x, c) * inv;
      }
    }
  }
  return out;
}

ImageBuffer upsample(const ImageBuffer& img, int factor) {
  if (factor < 1) throw InvalidArgument("upsample: factor must be >= 1");
  ImageBuffer out(img.height * factor, img.width * factor, img.channels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y / factor, x / factor, c);
    }
  }
  return out;
}

}  // namespace splatflow
