#include "evkit/mcflow/flow_params.hpp"

#include <algorithm>
#include <cmath>

#include "evkit/error.hpp"

namespace evkit::mcflow {

FlowParams::FlowParams(int cols, int rows) : cols_(cols), rows_(rows) {
  if (cols < 1 || rows < 1) throw ContractError("flow grid must be at least 1 x 1");
  cells_.assign(static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows), Vec2::Zero());
}

FlowParams FlowParams::constant(double u, double v) {
  FlowParams f(1, 1);
  f.cells_[0] = Vec2(u, v);
  return f;
}

std::vector<double> FlowParams::flat() const {
  std::vector<double> p;
  p.reserve(2 * cells_.size());
  for (const Vec2& c : cells_) {
    p.push_back(c.x());
    p.push_back(c.y());
  }
  return p;
}

void FlowParams::set_flat(const std::vector<double>& p) {
  if (p.size() != 2 * cells_.size()) throw ContractError("flow parameter vector has wrong size");
  for (std::size_t i = 0; i < cells_.size(); ++i) cells_[i] = Vec2(p[2 * i], p[2 * i + 1]);
}

Vec2 FlowParams::at(double x, double y, int width, int height) const {
  if (cells_.size() == 1) return cells_[0];
  const double gx = std::clamp((x + 0.5) * cols_ / width - 0.5, 0.0, cols_ - 1.0);
  const double gy = std::clamp((y + 0.5) * rows_ / height - 0.5, 0.0, rows_ - 1.0);
  const int i0 = static_cast<int>(std::floor(gx)), j0 = static_cast<int>(std::floor(gy));
  const int i1 = std::min(i0 + 1, cols_ - 1), j1 = std::min(j0 + 1, rows_ - 1);
  const double ax = gx - i0, ay = gy - j0;
  return (1 - ay) * ((1 - ax) * cell(i0, j0) + ax * cell(i1, j0)) +
         ay * ((1 - ax) * cell(i0, j1) + ax * cell(i1, j1));
}

FlowParams FlowParams::resampled(int cols, int rows, int width, int height) const {
  FlowParams out(cols, rows);
  for (int j = 0; j < rows; ++j) {
    for (int i = 0; i < cols; ++i) {
      const double x = (i + 0.5) * width / cols - 0.5;
      const double y = (j + 0.5) * height / rows - 0.5;
      out.cell(i, j) = at(x, y, width, height);
    }
  }
  return out;
}

FlowField FlowParams::to_flow_field(int width, int height, TimeUs t0, TimeUs t1) const {
  FlowField f(t0, t1, width, height);
  const double dt = us_to_s(t1 - t0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec2 v = at(x, y, width, height);
      f.u(x, y) = v.x() * dt;
      f.v(x, y) = v.y() * dt;
    }
  }
  return f;
}

bool FlowParams::finite() const {
  return std::all_of(cells_.begin(), cells_.end(), [](const Vec2& c) { return c.allFinite(); });
}

double smoothness(const FlowParams& flow, double scale, double alpha, double eps) {
  const double floor = std::pow(eps * eps, alpha);
  auto rho = [&](double d) { return std::pow(d * d + eps * eps, alpha) - floor; };
  double s = 0.0;
  for (int j = 0; j < flow.rows(); ++j) {
    for (int i = 0; i < flow.cols(); ++i) {
      const Vec2 c = flow.cell(i, j) * scale;
      if (i + 1 < flow.cols()) {
        const Vec2 d = flow.cell(i + 1, j) * scale - c;
        s += rho(d.x()) + rho(d.y());
      }
      if (j + 1 < flow.rows()) {
        const Vec2 d = flow.cell(i, j + 1) * scale - c;
        s += rho(d.x()) + rho(d.y());
      }
    }
  }
  return s;
}

}  // namespace evkit::mcflow
