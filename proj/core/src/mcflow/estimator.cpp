#include "evkit/mcflow/estimator.hpp"

#include <cmath>
#include <limits>

#include "evkit/error.hpp"
#include "evkit/util/parallel.hpp"
#include "evkit/util/rng.hpp"

namespace evkit::mcflow {

void EstimatorConfig::validate() const {
  objective.validate();
  if (schedule.empty()) throw ContractError("grid schedule is empty");
  for (const GridSize& g : schedule) {
    if (g.cols < 1 || g.rows < 1) throw ContractError("grid sizes must be positive");
  }
  if (starts < 1) throw ContractError("need at least one start");
  if (max_iters < 1) throw ContractError("max_iters must be positive");
  if (!(initial_step > 0.0) || !(min_step > 0.0) || !(fd_h > 0.0)) {
    throw ContractError("optimizer step sizes must be positive");
  }
  if (!(lambda_s >= 0.0)) throw ContractError("lambda_s must be non-negative");
  if (scan_radius > 0.0 && !(scan_step > 0.0)) throw ContractError("scan step must be positive");
}

namespace {

// Works in displacement units (px over the window).
class Problem {
 public:
  Problem(const ContrastObjective& obj, int cols, int rows, double window_s, double lambda)
      : obj_(obj), cols_(cols), rows_(rows), window_s_(window_s), lambda_(lambda) {}

  FlowParams to_flow(const std::vector<double>& d) const {
    FlowParams f(cols_, rows_);
    std::vector<double> v(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) v[i] = d[i] / window_s_;
    f.set_flat(v);
    return f;
  }

  double raw(const std::vector<double>& d) const { return obj_.value(to_flow(d)); }

  double penalized(const std::vector<double>& d) const {
    const FlowParams f = to_flow(d);
    return obj_.value(f) - lambda_ * smoothness(f, window_s_);
  }

 private:
  const ContrastObjective& obj_;
  int cols_;
  int rows_;
  double window_s_;
  double lambda_;
};

struct Ascent {
  std::vector<double> d;
  double value = 0.0;
  bool converged = true;
  std::vector<double> trace;
};

Ascent ascend(const Problem& prob, std::vector<double> d, const EstimatorConfig& cfg) {
  Ascent out;
  out.d = std::move(d);
  out.value = prob.penalized(out.d);
  out.converged = false;
  double alpha = cfg.initial_step;
  const std::size_t n = out.d.size();
  std::vector<double> grad(n);
  for (int it = 0; it < cfg.max_iters; ++it) {
    parallel_for(n, cfg.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        std::vector<double> hi = out.d, lo = out.d;
        hi[i] += cfg.fd_h;
        lo[i] -= cfg.fd_h;
        grad[i] = (prob.penalized(hi) - prob.penalized(lo)) / (2.0 * cfg.fd_h);
      }
    });
    double gn = 0.0;
    for (double g : grad) gn += g * g;
    gn = std::sqrt(gn);
    if (!(gn > 0.0)) {
      out.converged = true;
      break;
    }
    bool improved = false;
    while (alpha >= cfg.min_step) {
      std::vector<double> cand = out.d;
      for (std::size_t i = 0; i < n; ++i) cand[i] += alpha * grad[i] / gn;
      const double v = prob.penalized(cand);
      if (v > out.value) {
        out.d = std::move(cand);
        out.value = v;
        out.trace.push_back(v);
        alpha = std::min(alpha * 1.5, 4.0 * cfg.initial_step);
        improved = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!improved) {
      out.converged = true;
      break;
    }
  }
  return out;
}

}  // namespace

EstimateResult estimate_flow(std::span<const Event> events, int width, int height,
                             const TimeSpan& window, const EstimatorConfig& config) {
  config.validate();
  if (events.empty()) throw ContractError("flow estimation needs events");
  if (window.empty()) throw ContractError("flow estimation window is empty");
  const double window_s = us_to_s(window.duration());
  const ContrastObjective obj(events, width, height, window.begin, config.objective);

  EstimateResult result;
  std::vector<double> best;
  double best_value = -std::numeric_limits<double>::infinity();

  for (std::size_t level = 0; level < config.schedule.size(); ++level) {
    const GridSize g = config.schedule[level];
    const Problem prob(obj, g.cols, g.rows, window_s, config.lambda_s);
    const std::size_t n = 2 * static_cast<std::size_t>(g.cols) * static_cast<std::size_t>(g.rows);

    std::vector<std::vector<double>> starts;
    if (level == 0) {
      Rng rng(mix_seed(config.seed, 0x3c4f));
      for (int s = 0; s < config.starts; ++s) {
        std::vector<double> d(n, 0.0);
        if (s > 0) {
          double du, dv;
          do {
            du = rng.uniform(-1.0, 1.0);
            dv = rng.uniform(-1.0, 1.0);
          } while (du * du + dv * dv > 1.0);
          for (std::size_t i = 0; i < n; i += 2) {
            d[i] = config.start_radius * du;
            d[i + 1] = config.start_radius * dv;
          }
        }
        starts.push_back(std::move(d));
      }
      if (config.scan_radius > 0.0) {
        const int k = static_cast<int>(std::floor(config.scan_radius / config.scan_step));
        std::vector<std::vector<double>> lattice;
        for (int j = -k; j <= k; ++j) {
          for (int i = -k; i <= k; ++i) {
            std::vector<double> d(n, 0.0);
            for (std::size_t c = 0; c < n; c += 2) {
              d[c] = i * config.scan_step;
              d[c + 1] = j * config.scan_step;
            }
            lattice.push_back(std::move(d));
          }
        }
        std::vector<double> vals(lattice.size());
        parallel_for(lattice.size(), config.threads, [&](std::size_t b, std::size_t e) {
          for (std::size_t i = b; i < e; ++i) vals[i] = prob.penalized(lattice[i]);
        });
        std::size_t arg = 0;
        for (std::size_t i = 1; i < vals.size(); ++i) {
          if (vals[i] > vals[arg]) arg = i;
        }
        starts.push_back(lattice[arg]);
      }
    } else {
      const GridSize prev = config.schedule[level - 1];
      const Problem prev_prob(obj, prev.cols, prev.rows, window_s, config.lambda_s);
      const FlowParams up = prev_prob.to_flow(best).resampled(g.cols, g.rows, width, height);
      std::vector<double> d = up.flat();
      for (double& x : d) x *= window_s;
      starts.push_back(std::move(d));
      best_value = -std::numeric_limits<double>::infinity();
    }

    std::vector<double> level_best;
    bool level_converged = true;
    for (auto& s : starts) {
      Ascent a = ascend(prob, std::move(s), config);
      result.trace.insert(result.trace.end(), a.trace.begin(), a.trace.end());
      if (a.value > best_value) {
        best_value = a.value;
        level_best = a.d;
        level_converged = a.converged;
      }
    }
    best = std::move(level_best);
    if (!level_converged) result.converged = false;

    if (level + 1 == config.schedule.size()) {
      result.flow = prob.to_flow(best);
      result.penalized = best_value;
      double clipped = 0.0;
      result.objective = obj.value(result.flow, &clipped);
      result.clipped_mass = clipped;
    }
  }
  return result;
}

}  // namespace evkit::mcflow
