#include "evkit/image.hpp"

#include <algorithm>
#include <cmath>

namespace evkit {

double sample_bilinear_clamped(const ImageD& img, double x, double y) {
  const int w = img.width();
  const int h = img.height();
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  const int x0 = std::min(static_cast<int>(x), std::max(w - 2, 0));
  const int y0 = std::min(static_cast<int>(y), std::max(h - 2, 0));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  return (1 - fx) * (1 - fy) * img(x0, y0) + fx * (1 - fy) * img(x1, y0) +
         (1 - fx) * fy * img(x0, y1) + fx * fy * img(x1, y1);
}

bool sample_bilinear_inside(const ImageD& img, double x, double y, double& out) {
  if (!(x >= 0.0 && y >= 0.0 && x <= img.width() - 1 && y <= img.height() - 1)) {
    return false;
  }
  out = sample_bilinear_clamped(img, x, y);
  return true;
}

}  // namespace evkit
