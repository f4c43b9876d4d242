#include "evkit/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "evkit/error.hpp"

namespace evkit::eval {

namespace {

void check_pair(const FlowField& pred, const FlowField& gt, const EvalMask& mask) {
  if (pred.width() != gt.width() || pred.height() != gt.height() ||
      mask.width() != gt.width() || mask.height() != gt.height()) {
    throw ContractError("prediction, ground truth and mask differ in size");
  }
  if (pred.t0 != gt.t0 || pred.t1 != gt.t1) {
    throw ContractError("prediction and ground truth cover different spans");
  }
}

double endpoint(const FlowField& a, const FlowField& b, int x, int y) {
  return std::hypot(a.u(x, y) - b.u(x, y), a.v(x, y) - b.v(x, y));
}

}  // namespace

EvalMask::EvalMask(int width, int height, bool fill)
    : mask_(width, height, static_cast<unsigned char>(fill ? 1 : 0)) {}

EvalMask EvalMask::from_events(std::span<const Event> events, int width, int height,
                               const TimeSpan& span) {
  EvalMask m(width, height);
  for (const Event& e : events) {
    if (!span.contains(e.t)) continue;
    if (e.x >= width || e.y >= height) throw ContractError("event outside mask bounds");
    m.set(e.x, e.y);
  }
  return m;
}

EvalMask EvalMask::from_events(std::span<const Event> events, int width, int height) {
  EvalMask m(width, height);
  for (const Event& e : events) {
    if (e.x >= width || e.y >= height) throw ContractError("event outside mask bounds");
    m.set(e.x, e.y);
  }
  return m;
}

std::size_t EvalMask::count() const {
  return static_cast<std::size_t>(
      std::count_if(mask_.pixels().begin(), mask_.pixels().end(), [](unsigned char v) { return v; }));
}

double aee(const FlowField& pred, const FlowField& gt, const EvalMask& mask) {
  check_pair(pred, gt, mask);
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask(x, y)) continue;
      sum += endpoint(pred, gt, x, y);
      ++n;
    }
  }
  if (n == 0) throw ContractError("AEE over an empty mask");
  return sum / static_cast<double>(n);
}

AaeResult aae(const FlowField& pred, const FlowField& gt, const EvalMask& mask) {
  check_pair(pred, gt, mask);
  AaeResult r;
  double sum = 0.0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask(x, y)) continue;
      const double pu = pred.u(x, y), pv = pred.v(x, y);
      const double gu = gt.u(x, y), gv = gt.v(x, y);
      const double np = std::hypot(pu, pv), ng = std::hypot(gu, gv);
      if (np < kZeroNorm || ng < kZeroNorm) {
        ++r.excluded;
        continue;
      }
      const double c = std::clamp((pu * gu + pv * gv) / (np * ng), -1.0, 1.0);
      sum += std::acos(c);
      ++r.pixels;
    }
  }
  if (r.pixels == 0) throw ContractError("AAE has no pixel with two nonzero vectors");
  r.degrees = sum / static_cast<double>(r.pixels) * 180.0 / std::numbers::pi;
  return r;
}

double xpe(const FlowField& pred, const FlowField& gt, const EvalMask& mask, double x_px) {
  check_pair(pred, gt, mask);
  if (!(x_px > 0.0)) throw ContractError("XPE threshold must be positive");
  std::size_t n = 0, over = 0;
  for (int y = 0; y < gt.height(); ++y) {
    for (int x = 0; x < gt.width(); ++x) {
      if (!mask(x, y)) continue;
      ++n;
      if (endpoint(pred, gt, x, y) > x_px) ++over;
    }
  }
  if (n == 0) throw ContractError("XPE over an empty mask");
  return 100.0 * static_cast<double>(over) / static_cast<double>(n);
}

EvalReport evaluate(const FlowField& pred, const FlowField& gt, const EvalMask& mask,
                    std::span<const double> thresholds) {
  EvalReport r;
  r.aee = aee(pred, gt, mask);
  const AaeResult a = aae(pred, gt, mask);
  r.aae = a.degrees;
  r.aae_excluded = a.excluded;
  r.n_pixels = mask.count();
  for (double t : thresholds) r.xpe[t] = xpe(pred, gt, mask, t);
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json xp = nlohmann::json::object();
  for (const auto& [t, v] : r.xpe) xp[fmt::format("{:g}", t)] = v;
  return {{"aee", r.aee},
          {"aae_deg", r.aae},
          {"xpe", xp},
          {"n_pixels", r.n_pixels},
          {"aae_excluded", r.aae_excluded}};
}

std::string to_text(const EvalReport& r) {
  std::string s = fmt::format("aee {:.6f}\naae_deg {:.6f}\n", r.aee, r.aae);
  for (const auto& [t, v] : r.xpe) s += fmt::format("{:g}pe {:.4f}\n", t, v);
  s += fmt::format("n_pixels {}\naae_excluded {}\n", r.n_pixels, r.aae_excluded);
  return s;
}

double charbonnier(double z, double alpha, double eps) { return std::pow(z * z + eps * eps, alpha); }

double photometric_loss(const GrayFrame& f0, const GrayFrame& f1, const FlowField& flow,
                        double alpha, double eps) {
  const int w = f0.width(), h = f0.height();
  if (f1.width() != w || f1.height() != h || flow.width() != w || flow.height() != h) {
    throw ContractError("photometric loss inputs differ in size");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double val;
      if (!sample_bilinear_inside(f1.intensity, x + flow.u(x, y), y + flow.v(x, y), val)) continue;
      sum += charbonnier(val - f0.intensity(x, y), alpha, eps);
      ++n;
    }
  }
  if (n == 0) throw ContractError("every warped pixel left the frame");
  return sum / static_cast<double>(n);
}

double smoothness_loss(const FlowField& flow, double alpha, double eps) {
  const int w = flow.width(), h = flow.height();
  if (w < 2 && h < 2) throw ContractError("smoothness needs at least two pixels in a direction");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) {
        sum += charbonnier(flow.u(x + 1, y) - flow.u(x, y), alpha, eps);
        sum += charbonnier(flow.v(x + 1, y) - flow.v(x, y), alpha, eps);
        n += 2;
      }
      if (y + 1 < h) {
        sum += charbonnier(flow.u(x, y + 1) - flow.u(x, y), alpha, eps);
        sum += charbonnier(flow.v(x, y + 1) - flow.v(x, y), alpha, eps);
        n += 2;
      }
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace evkit::eval
