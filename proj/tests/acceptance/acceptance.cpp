// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Usage: evkit_acceptance [path/to/evkit]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <fmt/format.h>

#include "evkit/boids/planner.hpp"
#include "evkit/boids/school.hpp"
#include "evkit/boids/voxel_map.hpp"
#include "evkit/camsim/simulator.hpp"
#include "evkit/encode/encoder.hpp"
#include "evkit/eval/metrics.hpp"
#include "evkit/mcflow/estimator.hpp"
#include "evkit/render/renderer.hpp"
#include "evkit/scene/scene.hpp"
#include "evkit/store/container.hpp"
#include "evkit/util/rng.hpp"
#include "planted_scene.hpp"
#include "test_support.hpp"

namespace {

using namespace evkit;
namespace tsup = evkit::test_support;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string evkit_bin;

// ---------------------------------------------------------------------------

GrayFrame random_frame(Rng& rng, int w, int h, TimeUs t) {
  GrayFrame f{t, ImageD(w, h)};
  for (double& v : f.intensity.data()) v = rng.uniform();
  return f;
}

Outcome event_counts() {
  const SensorConfig sensor = SensorConfig::desk(32, 32);
  Rng rng(101);
  std::size_t pixels = 0, events = 0;
  for (int pair = 0; pair < 100; ++pair) {
    const GrayFrame a = random_frame(rng, 32, 32, 0);
    const GrayFrame b = random_frame(rng, 32, 32, 58824);
    camsim::EventSimulator sim(sensor);
    sim.reset(a);
    const auto ev = sim.process(b);
    Image<int> got(32, 32, 0);
    for (const Event& e : ev) ++got(e.x, e.y);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const double dl = std::log(b.intensity(x, y) + camsim::kLogEps) -
                          std::log(a.intensity(x, y) + camsim::kLogEps);
        const int want = static_cast<int>(std::floor(std::abs(dl) / sensor.c_pos));
        if (got(x, y) != want) {
          return {false, fmt::format("pair {} pixel ({}, {}): {} events, oracle {}", pair, x, y,
                                     got(x, y), want)};
        }
        ++pixels;
      }
    }
    events += ev.size();
  }
  return {true, fmt::format("{} pixels, {} events, all exact", pixels, events)};
}

Outcome even_timestamps() {
  const SensorConfig sensor = SensorConfig::desk(32, 32);
  Rng rng(202);
  std::size_t checked = 0;
  double worst = 0.0;
  for (int pair = 0; pair < 100; ++pair) {
    const TimeUs ta = static_cast<TimeUs>(rng.below(1000000));
    const TimeUs tb = ta + 1000 + static_cast<TimeUs>(rng.below(200000));
    const GrayFrame a = random_frame(rng, 32, 32, ta);
    const GrayFrame b = random_frame(rng, 32, 32, tb);
    camsim::EventSimulator sim(sensor);
    sim.reset(a);
    std::map<std::pair<int, int>, std::vector<TimeUs>> per_pixel;
    for (const Event& e : sim.process(b)) per_pixel[{e.x, e.y}].push_back(e.t);
    for (const auto& [px, ts] : per_pixel) {
      const std::size_t n = ts.size();
      if (n < 2) continue;
      const double gap = static_cast<double>(tb - ta) / static_cast<double>(n + 1);
      for (std::size_t k = 0; k < n; ++k) {
        const double prev = k == 0 ? static_cast<double>(ta) : static_cast<double>(ts[k - 1]);
        if (k > 0) worst = std::max(worst, std::abs(ts[k] - prev - gap));
        worst = std::max(worst, std::abs(static_cast<double>(ts[k]) - (ta + (k + 1) * gap)));
        ++checked;
      }
    }
  }
  return {worst <= 1.0 && checked > 0,
          fmt::format("{} timestamps, worst deviation {:.3f} us", checked, worst)};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Outcome storage() {
  tsup::TempDir dir("evkit-accept");
  const TimeUs t_max = 600'000'000;
  const EventStream stream = tsup::random_stream(303, 1'000'000, 640, 480, t_max);
  store::write_container(dir / "a.evz", stream, {}, {});
  store::write_container(dir / "b.evz", stream, {}, {});
  if (slurp(dir / "a.evz") != slurp(dir / "b.evz")) return {false, "repeated writes differ"};

  const store::ContainerReader reader(dir / "a.evz");
  const TimeSpan range = reader.recording_range();
  Rng rng(304);
  store::SliceOptions opt;
  opt.load_frames = false;
  opt.load_flow = false;
  double worst_ms = 0.0, total_ms = 0.0;
  std::size_t total_events = 0;
  for (int k = 0; k < 1000; ++k) {
    const TimeUs len = static_cast<TimeUs>(rng.below(5'000'000));
    const TimeUs a = range.begin + static_cast<TimeUs>(rng.below(
                                       static_cast<std::uint64_t>(range.end - range.begin - len)));
    const TimeUs b = a + len;
    const auto t0 = Clock::now();
    const auto slice = reader.read_slice(a, b, opt);
    const double ms = 1e3 * seconds_since(t0);
    worst_ms = std::max(worst_ms, ms);
    total_ms += ms;
    const auto want = slice_events(stream.events(), a, b);
    if (slice.events.vector() != want) {
      return {false, fmt::format("slice [{}, {}) differs from oracle", a, b)};
    }
    total_events += want.size();
  }
  return {worst_ms < 10.0,
          fmt::format("1000 slices, {} events, mean {:.3f} ms, max {:.3f} ms, writes identical",
                      total_events, total_ms / 1000, worst_ms)};
}

Outcome sample_counts() {
  tsup::TempDir dir("evkit-accept");
  const SensorConfig sensor = SensorConfig::desk(32, 32);
  render::RenderScene scene;
  render::PresetOptions opt;
  const auto traj = render::preset_down_looking(opt);
  const auto seq = render::render_sequence(scene, traj, {}, sensor, 5.0, 20.0);
  std::vector<GrayFrame> frames;
  for (const auto& s : seq) frames.push_back(s.frame);
  render::compose_dataset(seq, camsim::simulate_events(frames, sensor), dir / "d.evz");
  const store::ContainerReader reader(dir / "d.evz");
  const std::size_t samples = store::iterate(reader, store::StrideMode::kGrayIndex, 1).size();
  const std::size_t long_frames = render::frame_times(0, 45.0, 20.0).size();
  const std::size_t long_samples = long_frames - 1;
  const double ratio = static_cast<double>(long_samples) / 800.0;
  return {samples == 99 && reader.flow_count() == 99 && long_frames == 900 && ratio > 0.5 &&
              ratio < 2.0,
          fmt::format("5 s: {} samples; 45 s: {} frames, {} samples ({:.2f}x of 800)", samples,
                      long_frames, long_samples, ratio)};
}

Outcome planted_flow() {
  const auto seq = tsup::make_planted_sequence(3.0, -2.0, 3);
  std::string detail;
  bool pass = true;
  for (auto kind : {mcflow::ObjectiveKind::kVariance, mcflow::ObjectiveKind::kMultifocalVariance}) {
    const auto t0 = Clock::now();
    double worst_aee = 0.0, worst_aae = 0.0;
    for (std::size_t k = 0; k < seq.flows.size(); ++k) {
      const FlowField& gt = seq.flows[k];
      const TimeSpan win{gt.t0, gt.t1};
      const auto events = slice_events(seq.events.events(), win.begin, win.end);
      mcflow::EstimatorConfig cfg;
      cfg.objective.kind = kind;
      cfg.schedule = {{1, 1}};
      cfg.seed = k;
      const auto r = mcflow::estimate_flow(events, seq.sensor.width, seq.sensor.height, win, cfg);
      const FlowField pred = r.flow.to_flow_field(seq.sensor.width, seq.sensor.height, win.begin, win.end);
      const auto mask = eval::EvalMask::from_events(events, seq.sensor.width, seq.sensor.height);
      worst_aee = std::max(worst_aee, eval::aee(pred, gt, mask));
      worst_aae = std::max(worst_aae, eval::aae(pred, gt, mask).degrees);
    }
    const double secs = seconds_since(t0);
    const bool ok = worst_aee < 0.5 && worst_aae < 5.0 && secs < 120.0;
    pass = pass && ok;
    detail += fmt::format("{}{}: AEE {:.3f} px, AAE {:.2f} deg, {:.1f} s",
                          detail.empty() ? "" : "; ",
                          kind == mcflow::ObjectiveKind::kVariance ? "variance" : "multifocal",
                          worst_aee, worst_aae, secs);
  }
  return {pass, detail};
}

Outcome metric_oracles() {
  Rng rng(606);
  double worst = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    const int w = 8 + static_cast<int>(rng.below(40));
    const int h = 8 + static_cast<int>(rng.below(40));
    FlowField a(0, 1, w, h), b(0, 1, w, h);
    for (double& v : a.u.data()) v = rng.uniform(-5, 5);
    for (double& v : a.v.data()) v = rng.uniform(-5, 5);
    for (double& v : b.u.data()) v = rng.uniform(-5, 5);
    for (double& v : b.v.data()) v = rng.uniform(-5, 5);
    eval::EvalMask mask(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) mask.set(x, y, rng.coin() || (x == 0 && y == 0));
    }
    double se = 0.0, sa = 0.0;
    std::size_t n = 0, na = 0;
    std::vector<double> errs;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (!mask(x, y)) continue;
        const double du = a.u(x, y) - b.u(x, y), dv = a.v(x, y) - b.v(x, y);
        const double e = std::sqrt(du * du + dv * dv);
        se += e;
        errs.push_back(e);
        ++n;
        const double na_ = std::hypot(a.u(x, y), a.v(x, y)), nb = std::hypot(b.u(x, y), b.v(x, y));
        if (na_ > eval::kZeroNorm && nb > eval::kZeroNorm) {
          const double c = (a.u(x, y) * b.u(x, y) + a.v(x, y) * b.v(x, y)) / (na_ * nb);
          sa += std::acos(std::clamp(c, -1.0, 1.0)) * 180.0 / M_PI;
          ++na;
        }
      }
    }
    auto rel = [](double got, double want) {
      return std::abs(got - want) / std::max(std::abs(want), 1e-12);
    };
    worst = std::max(worst, rel(eval::aee(a, b, mask), se / n));
    worst = std::max(worst, rel(eval::aae(a, b, mask).degrees, sa / na));
    double last = 101.0;
    for (double x = 0.25; x <= 8.0; x += 0.25) {
      const double want = 100.0 * std::count_if(errs.begin(), errs.end(), [x](double e) { return e > x; }) / n;
      const double got = eval::xpe(a, b, mask, x);
      worst = std::max(worst, std::abs(got - want) / std::max(want, 1.0));
      if (got > last) return {false, fmt::format("XPE increased at X = {}", x)};
      last = got;
    }
  }
  return {worst <= 1e-6, fmt::format("50 pairs, worst relative deviation {:.2e}, XPE monotone", worst)};
}

Outcome warp_consistency() {
  render::RenderScene scene;
  render::PresetOptions opt;
  opt.seed = 7;
  const auto traj = render::preset_down_looking(opt);
  const render::FishTrack fish{{0.0, 5.0},
                               {{render::Vec3(0, 0, 2.3), render::Vec3(0.3, 0.1, 0)},
                                {render::Vec3(1.5, 0.5, 2.3), render::Vec3(0.3, 0.1, 0)}}};
  const std::vector<render::FishTrack> tracks{fish};
  const auto seq = render::render_sequence(scene, traj, tracks, SensorConfig::desk(128, 128), 1.0, 20.0);
  Rng rng(707);
  double worst_true = 0.0, best_bad = 1e9;
  bool ordered = true;
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
    const auto& a = seq[k];
    const auto& b = seq[k + 1];
    const double good = render::warp_check(a.frame, b.frame, *a.flow, &a.layers, &b.layers).mean;
    worst_true = std::max(worst_true, good);
    for (int c = 0; c < 10; ++c) {
      FlowField bad = *a.flow;
      const double mag = rng.uniform(1.0, 4.0);
      const double ang = rng.uniform(0.0, 2.0 * M_PI);
      for (double& u : bad.u.data()) u += mag * std::cos(ang);
      for (double& v : bad.v.data()) v += mag * std::sin(ang);
      const double r = render::warp_check(a.frame, b.frame, bad, &a.layers, &b.layers).mean;
      best_bad = std::min(best_bad, r);
      ordered = ordered && r > good;
    }
  }
  return {worst_true < 0.02 && ordered,
          fmt::format("{} pairs, true residual max {:.4f}, corrupted min {:.4f}", seq.size() - 1,
                      worst_true, best_bad)};
}

Outcome boids_properties() {
  using boids::Vec3;
  boids::SchoolConfig cfg;
  cfg.size = 50;
  cfg.seed = 808;
  cfg.w_leader = 4.0;
  const boids::LeaderPath path{{Vec3(0, 0, 0), Vec3(8, 3, 1), Vec3(-4, 6, 2)}, 1, 0.5};
  const boids::VoxelMap obstacles =
      boids::build_voxel_map(std::vector<boids::Obstacle>{{Vec3(4, 1, 0.5), 1.0}}, 0.25);

  // Clamp over 500 steps.
  boids::School s(cfg, path);
  boids::Environment env;
  env.voxels = &obstacles;
  for (int k = 0; k < 500; ++k) {
    s.step(env, 2);
    for (const auto& b : s.boids()) {
      if (!(b.velocity.norm() <= cfg.v_max)) {
        return {false, fmt::format("speed {} > {} at step {}", b.velocity.norm(), cfg.v_max, k)};
      }
    }
  }

  // Bit-identical trajectories.
  auto run = [&](int threads) {
    boids::School school(cfg, path);
    return boids::run_school(school, 0, env, 500, threads);
  };
  const auto r1 = run(1);
  const auto r2 = run(1);
  const auto r4 = run(4);
  auto same = [](const auto& x, const auto& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].t != y[i].t || !(x[i].state == y[i].state)) return false;
    }
    return true;
  };
  if (!same(r1, r2)) return {false, "two runs differ"};
  if (!same(r1, r4)) return {false, "1 vs 4 threads differ"};

  // Equal and opposite pair forces.
  Rng rng(809);
  double worst_pair = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Vec3 c(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const Vec3 d(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    const std::vector<boids::BoidState> pair{{c + d, Vec3::Zero()}, {c - d, Vec3::Zero()}};
    worst_pair = std::max(worst_pair, (boids::force_cohesion(0, pair, cfg) +
                                       boids::force_cohesion(1, pair, cfg)).norm());
    worst_pair = std::max(worst_pair, (boids::force_separation(0, pair, cfg, k) +
                                       boids::force_separation(1, pair, cfg, k)).norm());
  }
  if (worst_pair > 1e-12) return {false, fmt::format("pair force imbalance {:.2e}", worst_pair)};

  // RRT paths against a dense sampling oracle.
  std::size_t segments = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng mr(mix_seed(810, seed));
    std::vector<boids::Obstacle> obs;
    for (int k = 0; k < 12; ++k) {
      obs.push_back({Vec3(mr.uniform(2, 18), mr.uniform(-4, 4), mr.uniform(-2, 2)), mr.uniform(0.5, 1.5)});
    }
    const boids::VoxelMap map = boids::build_voxel_map(obs, 0.25);
    boids::PlannerConfig pc;
    pc.seed = seed;
    pc.bounds = {Vec3(-1, -6, -3), Vec3(21, 6, 3)};
    pc.max_iters = 20000;
    const Vec3 start(0, 0, 0), goal(20, 0, 0);
    const auto lp = boids::plan_leader_path(map, start, goal, pc);
    if (lp.waypoints.front() != start || lp.waypoints.back() != goal) {
      return {false, fmt::format("map {}: path does not join start and goal", seed)};
    }
    for (std::size_t i = 0; i + 1 < lp.waypoints.size(); ++i) {
      const Vec3 a = lp.waypoints[i], b = lp.waypoints[i + 1];
      const int n = std::max(1, static_cast<int>(std::ceil((b - a).norm() / (0.25 / 20))));
      for (int j = 0; j <= n; ++j) {
        if (map.occupied_at(a + (b - a) * (static_cast<double>(j) / n))) {
          return {false, fmt::format("map {}: segment {} hits an obstacle", seed, i)};
        }
      }
      ++segments;
    }
  }
  return {true, fmt::format("clamp held 500 steps x 50 boids; runs identical; pair imbalance "
                            "{:.1e}; 20 maps, {} segments collision-free",
                            worst_pair, segments)};
}

Outcome scene_determinism() {
  double worst_dot = 1.0;
  std::size_t placements = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto mesh = scene::make_seabed(40, 40, 0.3, seed, 0.6);
    const auto spec = scene::SceneSpec::defaults(seed);
    const scene::SceneFile a{spec, scene::sample_placements(mesh, spec)};
    const scene::SceneFile b{spec, scene::sample_placements(mesh, spec)};
    if (scene::format_scene(a) != scene::format_scene(b)) {
      return {false, fmt::format("seed {}: scene files differ", seed)};
    }
    for (const auto& p : a.placements) {
      if (p.vertex >= mesh.vertices.size() || p.position != scene::enu_to_ned(mesh.vertices[p.vertex])) {
        return {false, fmt::format("seed {}: placement off its vertex", seed)};
      }
      const scene::Vec3 n = scene::enu_to_ned(mesh.normals[p.vertex]).normalized();
      worst_dot = std::min(worst_dot, (p.rotation * scene::kModelUp).dot(n));
      ++placements;
    }
  }
  Rng rng(909);
  for (int k = 0; k < 10000; ++k) {
    const scene::Vec3 p(rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3), rng.uniform(-1e3, 1e3));
    if (scene::enu_to_ned(scene::enu_to_ned(p)) != p) return {false, "ENU->NED not an involution"};
  }
  return {worst_dot >= 1.0 - 1e-6,
          fmt::format("10 seeds, {} placements on vertices, min alignment {:.9f}, involution exact",
                      placements, worst_dot)};
}

Outcome encoder_conservation() {
  const auto stream = tsup::random_stream(1010, 200000, 64, 48, 1'000'000);
  encode::EncoderConfig count;
  count.bins = 5;
  const auto v = encode::encode_count(stream, count, {0, 1'000'000});
  const double total = v.sum();
  if (total != static_cast<double>(stream.size())) {
    return {false, fmt::format("count sum {} != {}", total, stream.size())};
  }

  const auto small = tsup::random_stream(1011, 5000, 16, 12, 100'000);
  encode::EncoderConfig g;
  g.scheme = encode::Scheme::kGaussian;
  g.bins = 6;
  g.lambda = 0.7;
  const TimeSpan span{0, 100'000};
  const auto gv = encode::encode_gaussian(small, g, span);
  const double width = 100'000.0 / g.bins;
  double worst = 0.0;
  std::vector<double> naive(gv.values().size(), 0.0);
  for (const Event& e : small) {
    for (int b = 0; b < g.bins; ++b) {
      const double mu = (b + 0.5) * width;
      const double sigma = g.lambda * width;
      const double w = std::exp(-(e.t - mu) * (e.t - mu) / (2.0 * sigma * sigma));
      naive[static_cast<std::size_t>(((b * 2 + (e.p > 0 ? 0 : 1)) * 12 + e.y) * 16 + e.x)] += w;
    }
  }
  for (std::size_t i = 0; i < naive.size(); ++i) worst = std::max(worst, std::abs(naive[i] - gv.values()[i]));
  return {worst <= 1e-9,
          fmt::format("count sum {} exact; Gaussian max deviation {:.2e}", total, worst)};
}

int run_command(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end() {
  if (evkit_bin.empty()) return {false, "evkit binary path not given"};
  tsup::TempDir dir("evkit-accept");
  const auto a = dir / "run1";
  const auto b = dir / "run2";
  if (run_command(fmt::format("{} --seed 5 --threads 1 generate --out {}", evkit_bin, a.string())) != 0 ||
      run_command(fmt::format("{} --seed 5 --threads 4 generate --out {}", evkit_bin, b.string())) != 0) {
    return {false, "generate failed"};
  }
  const std::string ca = slurp(a / "data.evz");
  const std::string cb = slurp(b / "data.evz");
  const std::uint64_t ha = fnv1a(ca), hb = fnv1a(cb);
  const bool sidecars = slurp(a / "data.props.json") == slurp(b / "data.props.json");
  return {!ca.empty() && ca == cb && sidecars,
          fmt::format("hash {:016x} vs {:016x} ({} bytes), sidecars {}", ha, hb, ca.size(),
                      sidecars ? "identical" : "differ")};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) evkit_bin = argv[1];
  const std::vector<Criterion> criteria{
      {1, "event-model exactness", 10, event_counts},
      {2, "evenly distributed timestamps", 5, even_timestamps},
      {3, "storage fidelity and locality", 60, storage},
      {4, "sample-count scaling", 5, sample_counts},
      {5, "planted-flow recovery", 240, planted_flow},
      {6, "metric oracle equivalence", 10, metric_oracles},
      {7, "ground-truth self-consistency", 30, warp_consistency},
      {8, "boids properties", 60, boids_properties},
      {9, "scene-synth determinism and alignment", 5, scene_determinism},
      {10, "encoder conservation", 5, encoder_conservation},
      {11, "end-to-end determinism", 120, end_to_end},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (secs >= c.limit_s) {
      o.pass = false;
      o.detail += fmt::format("; over time limit {:.0f} s", c.limit_s);
    }
    failed += o.pass ? 0 : 1;
    fmt::print("{} [{:2}] {} ({:.2f} s): {}\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail);
    std::fflush(stdout);
  }
  fmt::print("{}/{} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
