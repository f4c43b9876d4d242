#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>

#include <fmt/format.h>

#include "evkit/camsim/simulator.hpp"
#include "evkit/error.hpp"
#include "evkit/eval/metrics.hpp"
#include "evkit/store/container.hpp"
#include "evkit/store/text_io.hpp"
#include "evkit/util/netpbm.hpp"
#include "evkit/util/rng.hpp"

namespace evkit::cli {

namespace {

bool is_container(const std::filesystem::path& p) { return p.extension() == ".evz"; }

struct Recording {
  EventStream events;
  std::vector<GrayFrame> frames;
  std::vector<FlowField> flows;
};

Recording load_recording(const store::ContainerReader& reader, bool flows) {
  Recording r;
  r.events = reader.read_all_events();
  for (std::size_t k = 0; k < reader.gray_count(); ++k) r.frames.push_back(reader.read_gray(k));
  if (flows) {
    for (std::size_t k = 0; k < reader.flow_count(); ++k) r.flows.push_back(reader.read_flow(k));
  }
  return r;
}

std::vector<GrayFrame> frames_from_dir(const std::filesystem::path& dir, double fps) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<GrayFrame> frames;
  for (std::size_t k = 0; k < files.size(); ++k) {
    frames.push_back({std::llround(static_cast<double>(k) * 1e6 / fps), read_pgm(files[k])});
  }
  return frames;
}

// Hue by angle, saturation by magnitude relative to `max_norm`.
Rgb flow_color(double u, double v, double max_norm) {
  const double mag = std::hypot(u, v);
  if (max_norm <= 0.0 || mag == 0.0) return {255, 255, 255};
  const double s = std::min(mag / max_norm, 1.0);
  double h = std::atan2(-v, -u) / std::numbers::pi;  // [-1, 1]
  h = (h + 1.0) * 3.0;                                // [0, 6]
  const int sector = static_cast<int>(std::floor(h)) % 6;
  const double f = h - std::floor(h);
  const double p = 1.0 - s;
  const double q = 1.0 - s * f;
  const double t = 1.0 - s * (1.0 - f);
  double r = 1.0, g = 1.0, b = 1.0;
  switch (sector) {
    case 0: r = 1; g = t; b = p; break;
    case 1: r = q; g = 1; b = p; break;
    case 2: r = p; g = 1; b = t; break;
    case 3: r = p; g = q; b = 1; break;
    case 4: r = t; g = p; b = 1; break;
    default: r = 1; g = p; b = q; break;
  }
  auto to8 = [](double c) { return static_cast<std::uint8_t>(std::lround(255.0 * c)); };
  return {to8(r), to8(g), to8(b)};
}

std::uint8_t gray8(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

}  // namespace

EventStream load_events(const std::filesystem::path& path, const SensorConfig& sensor) {
  if (is_container(path)) return store::ContainerReader(path).read_all_events();
  return store::import_text(path, sensor);
}

std::size_t cmd_simulate_events(const SimulateOptions& opt) {
  Recording rec;
  SensorConfig sensor = opt.sensor;
  if (is_container(opt.input)) {
    store::ContainerReader reader(opt.input);
    sensor = reader.sensor();
    rec = load_recording(reader, true);
  } else {
    rec.frames = frames_from_dir(opt.input, opt.fps > 0.0 ? opt.fps : sensor.compare_rate);
    if (!rec.frames.empty()) {
      sensor.width = rec.frames.front().width();
      sensor.height = rec.frames.front().height();
    }
  }
  const EventStream events = camsim::simulate_events(rec.frames, sensor, opt.threads);
  if (is_container(opt.output)) {
    store::write_container(opt.output, events, rec.frames, rec.flows);
  } else {
    store::export_text(opt.output, events);
  }
  return events.size();
}

std::size_t cmd_encode(const EncodeOptions& opt) {
  const EventStream stream = load_events(opt.input, opt.sensor);
  const TimeSpan span = opt.span.empty() ? stream.span() : opt.span;
  const auto volume = encode::encode(stream, opt.encoder, span);
  return encode::export_volume_pgm(volume, opt.out_dir, "volume").size();
}

std::size_t cmd_estimate(const EstimateOptions& opt) {
  store::ContainerReader reader(opt.input);
  const Recording rec = load_recording(reader, false);
  const int w = reader.sensor().width;
  const int h = reader.sensor().height;

  if (opt.span < 1) throw ContractError("span must be at least 1");
  std::vector<TimeUs> edges(reader.gray_times().begin(), reader.gray_times().end());
  if (edges.size() < 2) {
    const TimeSpan range = reader.recording_range();
    edges.clear();
    for (TimeUs t = range.begin; t < range.end; t += 100000) edges.push_back(t);
    edges.push_back(range.end);
  }

  std::vector<FlowField> flows;
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const TimeSpan interval{edges[k], edges[k + 1]};
    // The fit window starts at interval k, shifted back near the end so it
    // still spans `span` intervals where the recording allows.
    const std::size_t n = edges.size() - 1;
    const std::size_t span = std::min(static_cast<std::size_t>(opt.span), n);
    const std::size_t first = std::min(k, n - span);
    const TimeSpan fit{edges[first], edges[first + span]};
    const auto events = reader.read_events(reader.lower_index(fit.begin), reader.lower_index(fit.end));
    if (events.size() < 2) {
      flows.emplace_back(interval.begin, interval.end, w, h);
      continue;
    }
    mcflow::EstimatorConfig cfg = opt.estimator;
    cfg.seed = mix_seed(opt.estimator.seed, k);
    const auto result = mcflow::estimate_flow(events, w, h, fit, cfg);
    flows.push_back(result.flow.to_flow_field(w, h, interval.begin, interval.end));
  }
  store::write_container(opt.output, rec.events, rec.frames, flows);
  return flows.size();
}

double cmd_evaluate(const EvaluateOptions& opt) {
  store::ContainerReader pred(opt.pred);
  store::ContainerReader gt(opt.gt);
  if (gt.flow_count() == 0) throw ContractError(opt.gt.string() + " has no flow channel");
  if (pred.flow_count() == 0) throw ContractError(opt.pred.string() + " has no flow channel");
  if (pred.flow_count() != gt.flow_count()) {
    throw ContractError(fmt::format("flow count mismatch: {} predicted, {} ground truth",
                                    pred.flow_count(), gt.flow_count()));
  }

  nlohmann::json slices = nlohmann::json::array();
  double aee_sum = 0.0, aae_sum = 0.0;
  std::size_t pixels = 0, aae_pixels = 0, aae_excluded = 0;
  std::map<double, double> xpe_sum;
  for (std::size_t k = 0; k < gt.flow_count(); ++k) {
    const FlowField g = gt.read_flow(k);
    const FlowField p = pred.read_flow(k);
    if (p.t0 != g.t0 || p.t1 != g.t1) {
      throw ContractError(fmt::format("flow {} spans differ: [{}, {}] vs [{}, {}]", k, p.t0, p.t1,
                                      g.t0, g.t1));
    }
    const auto events = gt.read_events(gt.lower_index(g.t0), gt.lower_index(g.t1));
    const auto mask = eval::EvalMask::from_events(events, g.width(), g.height());
    if (mask.count() == 0) continue;
    const double e = eval::aee(p, g, mask);
    const double x1 = eval::xpe(p, g, mask, 1.0);
    const double x2 = eval::xpe(p, g, mask, 2.0);
    const double x3 = eval::xpe(p, g, mask, 3.0);
    nlohmann::json s{{"index", k}, {"t0", g.t0}, {"t1", g.t1}, {"pixels", mask.count()},
                     {"aee", e},   {"1pe", x1},  {"2pe", x2},  {"3pe", x3}};
    aee_sum += e * mask.count();
    xpe_sum[1.0] += x1 * mask.count();
    xpe_sum[2.0] += x2 * mask.count();
    xpe_sum[3.0] += x3 * mask.count();
    pixels += mask.count();
    try {
      const auto a = eval::aae(p, g, mask);
      s["aae"] = a.degrees;
      aae_sum += a.degrees * a.pixels;
      aae_pixels += a.pixels;
      aae_excluded += a.excluded;
    } catch (const ContractError&) {
      s["aae"] = nullptr;
      aae_excluded += mask.count();
    }
    slices.push_back(s);
  }
  if (pixels == 0) throw ContractError("no slice has any event; nothing to evaluate");

  eval::EvalReport agg;
  agg.aee = aee_sum / pixels;
  agg.aae = aae_pixels > 0 ? aae_sum / aae_pixels : 0.0;
  for (const auto& [x, sum] : xpe_sum) agg.xpe[x] = sum / pixels;
  agg.n_pixels = pixels;
  agg.aae_excluded = aae_excluded;

  if (!opt.report.empty()) {
    nlohmann::json j{{"aggregate", eval::to_json(agg)}, {"slices", slices}};
    std::ofstream out(opt.report);
    if (!out) throw IoError("cannot write " + opt.report.string());
    out << j.dump(2) << '\n';
  }
  if (opt.text) std::cout << eval::to_text(agg);
  if (opt.budget >= 0.0 && agg.aee > opt.budget) {
    throw BudgetExceeded(fmt::format("AEE {:.6f} exceeds budget {:.6f}", agg.aee, opt.budget));
  }
  return agg.aee;
}

VisualMode parse_visual_mode(const std::string& s) {
  if (s == "overlay") return VisualMode::kOverlay;
  if (s == "flow-color") return VisualMode::kFlowColor;
  if (s == "volume") return VisualMode::kVolume;
  throw ContractError("unknown visualization mode '" + s + "' (overlay, flow-color, volume)");
}

std::size_t cmd_visualize(const VisualizeOptions& opt) {
  if (opt.window_us <= 0) throw ContractError("window must be positive");
  store::ContainerReader reader(opt.input);
  std::filesystem::create_directories(opt.out_dir);
  const int w = reader.sensor().width;
  const int h = reader.sensor().height;
  std::size_t written = 0;

  switch (opt.mode) {
    case VisualMode::kOverlay: {
      const TimeSpan range = reader.recording_range();
      store::SliceOptions so;
      so.load_flow = false;
      for (TimeUs t = range.begin; t < range.end; t += opt.window_us) {
        const auto slice = reader.read_slice(t, std::min(t + opt.window_us, range.end), so);
        Image<Rgb> img(w, h, Rgb{0, 0, 0});
        if (slice.gray_start) {
          for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
              const auto g = gray8(slice.gray_start->intensity(x, y));
              img(x, y) = {g, g, g};
            }
          }
        }
        for (const Event& e : slice.events) {
          img(e.x, e.y) = e.positive() ? Rgb{255, 0, 0} : Rgb{0, 0, 255};
        }
        write_ppm(opt.out_dir / fmt::format("overlay_{:05d}.ppm", written), img);
        ++written;
      }
      break;
    }
    case VisualMode::kFlowColor: {
      for (std::size_t k = 0; k < reader.flow_count(); ++k) {
        const FlowField f = reader.read_flow(k);
        double max_norm = 0.0;
        for (std::size_t i = 0; i < f.u.size(); ++i) {
          max_norm = std::max(max_norm, std::hypot(f.u.data()[i], f.v.data()[i]));
        }
        Image<Rgb> img(w, h);
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) img(x, y) = flow_color(f.u(x, y), f.v(x, y), max_norm);
        }
        write_ppm(opt.out_dir / fmt::format("flow_{:05d}.ppm", k), img);
        ++written;
      }
      break;
    }
    case VisualMode::kVolume: {
      const EventStream events = reader.read_all_events();
      const auto path = opt.out_dir / "events.ply";
      std::ofstream out(path, std::ios::binary);
      if (!out) throw IoError("cannot write " + path.string());
      out << "ply\nformat ascii 1.0\n"
          << "element vertex " << events.size() << "\n"
          << "property int x\nproperty int y\nproperty double t\nproperty int p\nend_header\n";
      for (const Event& e : events) {
        out << e.x << ' ' << e.y << ' ' << fmt::format("{:.6f}", us_to_s(e.t)) << ' '
            << static_cast<int>(e.p) << '\n';
      }
      if (!out) throw IoError("write failed: " + path.string());
      written = events.size();
      break;
    }
  }
  return written;
}

std::size_t cmd_import(const ImportOptions& opt) {
  const EventStream events = store::import_text(opt.input, opt.sensor);
  store::write_container(opt.output, events, {}, {});
  return events.size();
}

std::size_t cmd_export(const std::filesystem::path& input, const std::filesystem::path& output) {
  const EventStream events = store::ContainerReader(input).read_all_events();
  store::export_text(output, events);
  return events.size();
}

}  // namespace evkit::cli
