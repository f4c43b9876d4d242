#include "evkit/mcflow/contrast.hpp"

#include <algorithm>
#include <cmath>

#include "evkit/error.hpp"

namespace evkit::mcflow {

Iwe warp_events(std::span<const Event> events, int width, int height, const FlowParams& flow,
                TimeUs t_ref, const WarpOptions& options) {
  Iwe iwe{ImageD(width, height, 0.0), t_ref, 0.0, 0.0};
  ImageD& img = iwe.image;
  const double mag = std::abs(options.weight);
  for (const Event& e : events) {
    const double dt = us_to_s(e.t - t_ref);
    const Vec2 v = flow.at(e.x, e.y, width, height);
    const double xw = e.x - dt * v.x();
    const double yw = e.y - dt * v.y();
    const double w = options.polarity == Polarity::kSigned ? options.weight * e.p : options.weight;
    const double fx = std::floor(xw), fy = std::floor(yw);
    const double ax = xw - fx, ay = yw - fy;
    const long long x0 = static_cast<long long>(fx), y0 = static_cast<long long>(fy);
    const double wts[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
    const long long xs[4] = {x0, x0 + 1, x0, x0 + 1};
    const long long ys[4] = {y0, y0, y0 + 1, y0 + 1};
    for (int k = 0; k < 4; ++k) {
      if (wts[k] == 0.0) continue;
      if (xs[k] < 0 || ys[k] < 0 || xs[k] >= width || ys[k] >= height) {
        iwe.clipped_mass += mag * wts[k];
        continue;
      }
      img(static_cast<int>(xs[k]), static_cast<int>(ys[k])) += w * wts[k];
      iwe.inside_mass += mag * wts[k];
    }
  }
  return iwe;
}

ImageD gaussian_blur(const ImageD& img, double sigma) {
  if (!(sigma > 0.0)) return img;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double norm = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= norm;
  const int w = img.width(), h = img.height();
  ImageD tmp(w, h, 0.0), out(w, h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        s += k[static_cast<std::size_t>(i + r)] * img(std::clamp(x + i, 0, w - 1), y);
      }
      tmp(x, y) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        s += k[static_cast<std::size_t>(i + r)] * tmp(x, std::clamp(y + i, 0, h - 1));
      }
      out(x, y) = s;
    }
  }
  return out;
}

namespace {

double patch_variance(const ImageD& img, int x0, int x1, int y0, int y1) {
  const double n = static_cast<double>(x1 - x0) * static_cast<double>(y1 - y0);
  if (n <= 0.0) return 0.0;
  double mean = 0.0;
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) mean += img(x, y);
  mean /= n;
  double var = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double d = img(x, y) - mean;
      var += d * d;
    }
  }
  return var / n;
}

double grad2(const ImageD& img, int x, int y) {
  const double gx = 0.5 * (img(x + 1, y) - img(x - 1, y));
  const double gy = 0.5 * (img(x, y + 1) - img(x, y - 1));
  return gx * gx + gy * gy;
}

// Mean over the patch's pixels that are interior to the whole image.
double patch_gradient(const ImageD& img, int x0, int x1, int y0, int y1) {
  const int w = img.width(), h = img.height();
  double s = 0.0;
  std::size_t n = 0;
  for (int y = std::max(y0, 1); y < std::min(y1, h - 1); ++y) {
    for (int x = std::max(x0, 1); x < std::min(x1, w - 1); ++x) {
      s += grad2(img, x, y);
      ++n;
    }
  }
  return n > 0 ? s / static_cast<double>(n) : 0.0;
}

}  // namespace

double image_variance(const ImageD& img) {
  if (img.width() * img.height() == 0) throw ContractError("empty image");
  return patch_variance(img, 0, img.width(), 0, img.height());
}

double gradient_magnitude(const ImageD& img) {
  if (img.width() < 3 || img.height() < 3) throw ContractError("gradient needs a 3 x 3 image");
  return patch_gradient(img, 0, img.width(), 0, img.height());
}

void Objective::validate() const {
  if (normalized()) {
    if (scales.empty()) throw ContractError("multi-focal objective needs patch scales");
    for (std::size_t i = 0; i < scales.size(); ++i) {
      if (scales[i] < 1) throw ContractError("patch scales must be positive");
      if (i > 0 && scales[i] <= scales[i - 1]) {
        throw ContractError("patch grids must grow (patch size descending)");
      }
    }
  }
  if (blur && !(blur_sigma > 0.0)) throw ContractError("blur sigma must be positive");
}

std::vector<double> multifocal_terms(const ImageD& img, ObjectiveKind base,
                                     std::span<const int> scales) {
  const int w = img.width(), h = img.height();
  std::vector<double> out;
  out.reserve(scales.size());
  for (int n : scales) {
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const int x0 = i * w / n, x1 = (i + 1) * w / n;
        const int y0 = j * h / n, y1 = (j + 1) * h / n;
        acc += base == ObjectiveKind::kVariance ? patch_variance(img, x0, x1, y0, y1)
                                                : patch_gradient(img, x0, x1, y0, y1);
      }
    }
    out.push_back(acc / (static_cast<double>(n) * n));
  }
  return out;
}

namespace {

ObjectiveKind base_kind(ObjectiveKind k) {
  return k == ObjectiveKind::kMultifocalGradient || k == ObjectiveKind::kGradientMagnitude
             ? ObjectiveKind::kGradientMagnitude
             : ObjectiveKind::kVariance;
}

}  // namespace

ContrastObjective::ContrastObjective(std::span<const Event> events, int width, int height,
                                     TimeUs t_ref, Objective objective, double weight)
    : events_(events), width_(width), height_(height), t_ref_(t_ref),
      objective_(std::move(objective)), weight_(weight) {
  if (events.empty()) throw ContractError("contrast objective needs events");
  if (width < 3 || height < 3) throw ContractError("contrast objective needs at least 3 x 3 pixels");
  objective_.validate();
  if (objective_.normalized()) {
    reference_ = multifocal_terms(prepared(FlowParams()), base_kind(objective_.kind),
                                  objective_.scales);
  }
}

ImageD ContrastObjective::prepared(const FlowParams& flow, double* clipped) const {
  Iwe iwe = warp_events(events_, width_, height_, flow, t_ref_,
                        {objective_.polarity, weight_});
  if (clipped != nullptr) *clipped = iwe.clipped_mass;
  if (objective_.blur) return gaussian_blur(iwe.image, objective_.blur_sigma);
  return std::move(iwe.image);
}

double ContrastObjective::value_of(const ImageD& img) const {
  double v = 0.0;
  switch (objective_.kind) {
    case ObjectiveKind::kVariance:
      v = image_variance(img);
      break;
    case ObjectiveKind::kGradientMagnitude:
      v = gradient_magnitude(img);
      break;
    case ObjectiveKind::kMultifocalVariance:
    case ObjectiveKind::kMultifocalGradient: {
      const auto terms = multifocal_terms(img, base_kind(objective_.kind), objective_.scales);
      double s = 0.0;
      int used = 0;
      for (std::size_t i = 0; i < terms.size(); ++i) {
        if (!(reference_[i] > 0.0)) continue;
        s += terms[i] / reference_[i];
        ++used;
      }
      if (used == 0) throw NumericError("identity-warp reference is zero at every scale");
      v = s / used;
      break;
    }
  }
  if (!std::isfinite(v)) throw NumericError("objective is not finite");
  return v;
}

double ContrastObjective::value(const FlowParams& flow, double* clipped) const {
  if (!flow.finite()) throw NumericError("flow parameters are not finite");
  return value_of(prepared(flow, clipped));
}

}  // namespace evkit::mcflow
