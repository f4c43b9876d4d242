#include "evkit/store/flow_accumulate.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace evkit::store {

FlowField accumulate_flow(std::span<const FlowField> flows, TimeUs t_start, TimeUs t_end) {
  if (!(t_start < t_end)) throw ContractError("accumulate_flow requires t_start < t_end");
  if (flows.empty()) throw ContractError("accumulate_flow: no flow fields");

  // Intervals overlapping the query, checked for contiguity.
  std::vector<std::size_t> used;
  TimeUs reached = t_start;
  for (std::size_t k = 0; k < flows.size() && reached < t_end; ++k) {
    const FlowField& f = flows[k];
    if (f.t1 <= reached) continue;
    if (f.t0 > reached) {
      throw ContractError(fmt::format("flow coverage gap at {} us", reached));
    }
    used.push_back(k);
    reached = f.t1;
  }
  if (reached < t_end || used.empty()) {
    throw ContractError(fmt::format("flow fields do not cover [{}, {}] us", t_start, t_end));
  }

  const int w = flows[used.front()].width();
  const int h = flows[used.front()].height();
  FlowField out(t_start, t_end, w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Displacement is summed on its own so a single interval is reproduced
      // bit-exactly.
      double su = 0.0;
      double sv = 0.0;
      double px = x;
      double py = y;
      for (std::size_t k : used) {
        const FlowField& f = flows[k];
        if (f.width() != w || f.height() != h) throw ContractError("flow size mismatch");
        const TimeUs a = std::max(t_start, f.t0);
        const TimeUs b = std::min(t_end, f.t1);
        const double frac = static_cast<double>(b - a) / static_cast<double>(f.t1 - f.t0);
        const double du = frac * sample_bilinear_clamped(f.u, px, py);
        const double dv = frac * sample_bilinear_clamped(f.v, px, py);
        su += du;
        sv += dv;
        px = x + su;
        py = y + sv;
        if (px < 0.0 || py < 0.0 || px > w - 1 || py > h - 1) break;
      }
      out.u(x, y) = su;
      out.v(x, y) = sv;
    }
  }
  return out;
}

}  // namespace evkit::store
