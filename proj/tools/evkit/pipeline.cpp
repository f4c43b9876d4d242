#include "pipeline.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "evkit/boids/planner.hpp"
#include "evkit/camsim/simulator.hpp"
#include "evkit/encode/augment.hpp"
#include "evkit/error.hpp"
#include "evkit/render/renderer.hpp"
#include "evkit/store/metadata.hpp"
#include "evkit/util/netpbm.hpp"
#include "evkit/util/rng.hpp"

namespace evkit::cli {

namespace {

// Fish swim this far above the ground; the school anchor sits this far ahead
// of the camera.
constexpr double kFishHeight = 0.8;
constexpr double kAnchorLead = 1.0;
constexpr double kVoxelSize = 0.25;

// Re-throws module errors with the pipeline stage in front of the message.
template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  auto label = [stage](const std::exception& e) { return fmt::format("[{}] {}", stage, e.what()); };
  try {
    return fn();
  } catch (const ContractError& e) {
    throw ContractError(label(e));
  } catch (const RangeError& e) {
    throw RangeError(label(e));
  } catch (const IoError& e) {
    throw IoError(label(e));
  } catch (const FormatError& e) {
    throw FormatError(label(e));
  } catch (const NumericError& e) {
    throw NumericError(label(e));
  } catch (const PlanningError& e) {
    throw PlanningError(label(e));
  }
}

nlohmann::json spec_to_json(const scene::SceneSpec& s) {
  nlohmann::json cat = nlohmann::json::array();
  for (const auto& m : s.catalogue) {
    cat.push_back({{"id", m.id}, {"mesh", m.mesh}, {"texture", m.texture}, {"radius", m.radius}});
  }
  return {{"clusters", s.clusters},         {"per_cluster", s.per_cluster},
          {"cluster_radius", s.cluster_radius}, {"scale_min", s.scale_min},
          {"scale_max", s.scale_max},       {"catalogue", cat}};
}

scene::SceneSpec spec_from_json(const nlohmann::json& j, scene::SceneSpec s) {
  s.clusters = j.value("clusters", s.clusters);
  s.per_cluster = j.value("per_cluster", s.per_cluster);
  s.cluster_radius = j.value("cluster_radius", s.cluster_radius);
  s.scale_min = j.value("scale_min", s.scale_min);
  s.scale_max = j.value("scale_max", s.scale_max);
  if (j.contains("catalogue")) {
    s.catalogue.clear();
    for (const auto& m : j.at("catalogue")) {
      s.catalogue.push_back({m.at("id").get<std::string>(), m.value("mesh", std::string{}),
                             m.value("texture", std::string{}), m.value("radius", 0.5)});
    }
  }
  return s;
}

render::Vec3 heading_dir(double yaw) { return {std::cos(yaw), std::sin(yaw), 0.0}; }

// Nearest free voxel centre to p with depth in [top, bottom]; p itself when
// free. Searches shells of growing radius (in voxels) in a fixed order.
boids::Vec3 nearest_free(const boids::VoxelMap& map, const boids::Vec3& p, double top,
                         double bottom) {
  if (!map.occupied_at(p)) return p;
  const boids::VoxelKey k0 = map.key_of(p);
  for (int r = 1; r <= 32; ++r) {
    std::optional<boids::Vec3> best;
    double best_d = 0.0;
    for (int dz = -r; dz <= r; ++dz) {
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
          const boids::VoxelKey k{k0[0] + dx, k0[1] + dy, k0[2] + dz};
          if (map.occupied(k)) continue;
          const boids::Vec3 c = map.center_of(k);
          if (c.z() < top || c.z() > bottom) continue;
          const double d = (c - p).squaredNorm();
          if (!best || d < best_d) {
            best = c;
            best_d = d;
          }
        }
      }
    }
    if (best) return *best;
  }
  throw PlanningError("no free space near the school anchor");
}

void write_camera(const std::filesystem::path& path, const render::CameraTrajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << fmt::format("# tilt {:.17g}\n# t_us n e d yaw\n", traj.tilt());
  for (const auto& s : traj.samples()) {
    out << fmt::format("{} {:.17g} {:.17g} {:.17g} {:.17g}\n", s.t, s.position.x(), s.position.y(),
                       s.position.z(), s.yaw);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

Seeds Seeds::derive(std::uint64_t master) {
  return {mix_seed(master, 1), mix_seed(master, 2), mix_seed(master, 3), mix_seed(master, 4)};
}

PipelineConfig PipelineConfig::defaults(std::uint64_t seed) {
  PipelineConfig c;
  c.seed = seed;
  c.seeds = Seeds::derive(seed);
  c.scene = scene::SceneSpec::defaults(c.seeds.scene);
  boids::SchoolConfig school;
  school.seed = c.seeds.boids;
  c.schools = {school};
  return c;
}

void PipelineConfig::validate() const {
  sensor.validate();
  scene.validate();
  for (const auto& s : schools) s.validate();
  if (!(z_ground > 0.0)) throw ContractError("z_ground must be positive");
  if (trajectory.preset != "down" && trajectory.preset != "forward") {
    throw ContractError("trajectory preset must be 'down' or 'forward'");
  }
  if (!(trajectory.duration_s > 0.0)) throw ContractError("duration must be positive");
  if (!(trajectory.altitude > kFishHeight + 0.2) || !(trajectory.altitude < z_ground)) {
    throw ContractError(fmt::format("altitude must lie in ({}, {})", kFishHeight + 0.2, z_ground));
  }
  if (!(noise_rate >= 0.0)) throw ContractError("noise rate must be non-negative");
  if (trajectory.duration_s * sensor.compare_rate < 2.0) {
    throw ContractError("duration too short for two brightness comparisons");
  }
}

nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json schools = nlohmann::json::array();
  for (const auto& s : c.schools) schools.push_back(boids::to_json(s));
  return {
      {"seed", c.seed},
      {"seeds",
       {{"scene", c.seeds.scene},
        {"boids", c.seeds.boids},
        {"noise", c.seeds.noise},
        {"optimizer", c.seeds.optimizer}}},
      {"sensor", store::sensor_to_json(c.sensor)},
      {"z_ground", c.z_ground},
      {"terrain",
       {{"nx", c.terrain.nx},
        {"ny", c.terrain.ny},
        {"spacing", c.terrain.spacing},
        {"amplitude", c.terrain.amplitude},
        {"mesh", c.terrain.mesh}}},
      {"scene", spec_to_json(c.scene)},
      {"static", c.static_scene},
      {"schools", schools},
      {"trajectory",
       {{"preset", c.trajectory.preset},
        {"duration_s", c.trajectory.duration_s},
        {"speed", c.trajectory.speed},
        {"altitude", c.trajectory.altitude}}},
      {"texture", c.texture},
      {"texels_per_metre", c.texels_per_metre},
      {"noise_rate", c.noise_rate},
  };
}

PipelineConfig pipeline_from_json(const nlohmann::json& j) {
  PipelineConfig c = PipelineConfig::defaults(j.value("seed", std::uint64_t{0}));
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    c.seeds.scene = s.value("scene", c.seeds.scene);
    c.seeds.boids = s.value("boids", c.seeds.boids);
    c.seeds.noise = s.value("noise", c.seeds.noise);
    c.seeds.optimizer = s.value("optimizer", c.seeds.optimizer);
  }
  if (j.contains("sensor")) c.sensor = store::sensor_from_json(j.at("sensor"), c.sensor);
  c.z_ground = j.value("z_ground", c.z_ground);
  if (j.contains("terrain")) {
    const auto& t = j.at("terrain");
    c.terrain.nx = t.value("nx", c.terrain.nx);
    c.terrain.ny = t.value("ny", c.terrain.ny);
    c.terrain.spacing = t.value("spacing", c.terrain.spacing);
    c.terrain.amplitude = t.value("amplitude", c.terrain.amplitude);
    c.terrain.mesh = t.value("mesh", c.terrain.mesh);
  }
  c.scene = spec_from_json(j.value("scene", nlohmann::json::object()), c.scene);
  c.scene.seed = c.seeds.scene;
  c.static_scene = j.value("static", c.static_scene);
  if (j.contains("schools")) {
    c.schools.clear();
    for (std::size_t k = 0; k < j.at("schools").size(); ++k) {
      const auto& s = j.at("schools")[k];
      boids::SchoolConfig sc = boids::school_from_json(s);
      if (!s.contains("seed")) sc.seed = mix_seed(c.seeds.boids, k);
      c.schools.push_back(sc);
    }
  } else {
    for (auto& s : c.schools) s.seed = c.seeds.boids;
  }
  if (j.contains("trajectory")) {
    const auto& t = j.at("trajectory");
    c.trajectory.preset = t.value("preset", c.trajectory.preset);
    c.trajectory.duration_s = t.value("duration_s", c.trajectory.duration_s);
    c.trajectory.speed = t.value("speed", c.trajectory.speed);
    c.trajectory.altitude = t.value("altitude", c.trajectory.altitude);
  }
  c.texture = j.value("texture", c.texture);
  c.texels_per_metre = j.value("texels_per_metre", c.texels_per_metre);
  c.noise_rate = j.value("noise_rate", c.noise_rate);
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return pipeline_from_json(j);
}

GenerateSummary run_generate(const PipelineConfig& cfg, const std::filesystem::path& out,
                             int threads) {
  cfg.validate();
  std::filesystem::create_directories(out);
  GenerateSummary summary;

  // Scene: terrain centred on the origin, corals on its vertices.
  const scene::SceneFile scene_file = staged("scene", [&] {
    scene::TerrainMesh mesh =
        cfg.terrain.mesh.empty()
            ? scene::make_seabed(cfg.terrain.nx, cfg.terrain.ny, cfg.terrain.spacing,
                                 cfg.seeds.scene, cfg.terrain.amplitude)
            : scene::read_mesh(cfg.terrain.mesh);
    if (cfg.terrain.mesh.empty()) {
      const scene::Vec3 centre(0.5 * (cfg.terrain.nx - 1) * cfg.terrain.spacing,
                               0.5 * (cfg.terrain.ny - 1) * cfg.terrain.spacing, 0.0);
      for (auto& v : mesh.vertices) v -= centre;
    }
    scene::write_mesh(out / "terrain.obj", mesh);
    scene::SceneFile sf{cfg.scene, scene::sample_placements(mesh, cfg.scene)};
    scene::write_scene(out / "scene.txt", sf);
    return sf;
  });

  // Camera path.
  const render::CameraTrajectory traj = staged("trajectory", [&] {
    render::PresetOptions opt;
    opt.duration_s = cfg.trajectory.duration_s;
    opt.z_ground = cfg.z_ground;
    opt.speed = cfg.trajectory.speed;
    opt.seed = cfg.seed;
    auto t = cfg.trajectory.preset == "down"
                 ? render::preset_down_looking(opt, cfg.trajectory.altitude)
                 : render::preset_forward_looking(opt, cfg.trajectory.altitude);
    write_camera(out / "camera.txt", t);
    return t;
  });

  // Fish schools following RRT leader paths alongside the camera.
  std::vector<boids::TrajectoryRecord> records;
  if (!cfg.static_scene && !cfg.schools.empty()) {
    staged("boids", [&] {
      std::vector<boids::Obstacle> obstacles = boids::obstacles_from_scene(scene_file);
      for (auto& o : obstacles) o.center.z() += cfg.z_ground;
      const boids::VoxelMap map = boids::build_voxel_map(obstacles, kVoxelSize);
      const double fish_depth = cfg.z_ground - kFishHeight;
      const double ceiling = cfg.z_ground - cfg.trajectory.altitude + 0.3;
      const auto& s0 = traj.samples().front();
      const auto& s1 = traj.samples().back();
      const boids::Vec3 anchor0 =
          boids::Vec3(s0.position.x(), s0.position.y(), fish_depth) + kAnchorLead * heading_dir(s0.yaw);
      const boids::Vec3 anchor1 =
          boids::Vec3(s1.position.x(), s1.position.y(), fish_depth) + kAnchorLead * heading_dir(s1.yaw);
      const int steps = static_cast<int>(std::ceil(cfg.trajectory.duration_s / cfg.schools.front().dt)) + 1;
      for (std::size_t k = 0; k < cfg.schools.size(); ++k) {
        boids::SchoolConfig sc = cfg.schools[k];
        const double floor = cfg.z_ground - 0.1;
        const boids::Vec3 start = nearest_free(map, anchor0 + sc.spawn_center, ceiling, floor);
        const boids::Vec3 goal = nearest_free(map, anchor1 + sc.spawn_center, ceiling, floor);
        boids::PlannerConfig pc;
        pc.seed = mix_seed(sc.seed, 0x77);
        pc.bounds.min = start.cwiseMin(goal) - boids::Vec3(3.0, 3.0, 0.0);
        pc.bounds.max = start.cwiseMax(goal) + boids::Vec3(3.0, 3.0, 0.0);
        pc.bounds.min.z() = ceiling;
        pc.bounds.max.z() = floor;
        boids::LeaderPath path = boids::plan_leader_path(map, start, goal, pc);
        if (path.waypoints.size() > 1) path.target = 1;
        sc.spawn_center = start;
        boids::School school(sc, path);
        boids::Environment env;
        env.voxels = &map;
        env.repellers.push_back({s0.position, 1.0, 3.0});
        env.surface = boids::PlanarRepeller{};
        const TimeUs t_end = traj.samples().back().t;
        auto recs = boids::run_school(school, static_cast<int>(k), env, steps, threads,
                                      [&](double t, boids::Environment& e) {
                                        const auto tu = std::min<TimeUs>(std::llround(t * 1e6), t_end);
                                        e.repellers[0].position = traj.pose_at(tu).position;
                                      });
        records.insert(records.end(), recs.begin(), recs.end());
        summary.fish += static_cast<std::size_t>(sc.size);
      }
    });
  }
  boids::write_trajectory(out / "fish.txt", records);

  // Frames and ground-truth flow.
  const render::RenderScene rs = staged("render", [&] {
    render::RenderScene r;
    r.z_ground = cfg.z_ground;
    r.texture = cfg.texture.empty()
                    ? render::GroundTexture::procedural(cfg.seeds.scene)
                    : render::GroundTexture::tiled(read_pgm(cfg.texture), cfg.texels_per_metre);
    r.decals = render::decals_from_scene(scene_file);
    if (!cfg.schools.empty()) r.fish_length = cfg.schools.front().model_scale;
    return r;
  });
  const std::vector<render::FishTrack> tracks = render::tracks_from_records(records);
  const auto samples = staged("render", [&] {
    return render::render_sequence(rs, traj, tracks, cfg.sensor, cfg.trajectory.duration_s,
                                   cfg.sensor.frame_rate, threads);
  });

  // Events from frames at the brightness comparison rate.
  EventStream events = staged("camsim", [&] {
    const auto times = render::frame_times(0, cfg.trajectory.duration_s, cfg.sensor.compare_rate);
    const auto rendered = render::render_frames(rs, traj, tracks, cfg.sensor, times, threads);
    std::vector<GrayFrame> frames;
    frames.reserve(rendered.size());
    for (const auto& r : rendered) frames.push_back(r.frame);
    EventStream ev = camsim::simulate_events(frames, cfg.sensor, threads);
    if (cfg.noise_rate > 0.0) {
      const TimeSpan span{0, std::llround(cfg.trajectory.duration_s * 1e6)};
      ev = encode::augment_noise(ev, cfg.noise_rate, span, cfg.seeds.noise);
    }
    return ev;
  });

  nlohmann::json props{
      {"generator", "evkit generate"},
      {"version", EVKIT_VERSION},
      {"seeds",
       {{"master", cfg.seed},
        {"scene", cfg.seeds.scene},
        {"boids", cfg.seeds.boids},
        {"noise", cfg.seeds.noise},
        {"optimizer", cfg.seeds.optimizer}}},
      {"config", to_json(cfg)},
      {"sensor", store::sensor_to_json(cfg.sensor)},
      {"files",
       {{"terrain", "terrain.obj"},
        {"scene", "scene.txt"},
        {"fish", "fish.txt"},
        {"camera", "camera.txt"}}},
      {"counts",
       {{"frames", samples.size()},
        {"samples", samples.empty() ? 0 : samples.size() - 1},
        {"events", events.size()},
        {"fish", summary.fish},
        {"corals", scene_file.placements.size()}}},
  };
  summary.container = out / "data.evz";
  staged("store", [&] { render::compose_dataset(samples, events, summary.container, props); });
  summary.frames = samples.size();
  summary.samples = samples.empty() ? 0 : samples.size() - 1;
  summary.events = events.size();
  return summary;
}

}  // namespace evkit::cli
