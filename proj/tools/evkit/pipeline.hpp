#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evkit/boids/school.hpp"
#include "evkit/event.hpp"
#include "evkit/scene/scene.hpp"

namespace evkit::cli {

struct Seeds {
  std::uint64_t scene = 0;
  std::uint64_t boids = 0;
  std::uint64_t noise = 0;
  std::uint64_t optimizer = 0;

  /// Independent per-stage seeds from one master seed.
  static Seeds derive(std::uint64_t master);
};

struct TerrainConfig {
  int nx = 60;
  int ny = 60;
  double spacing = 0.25;
  double amplitude = 0.4;
  /// Optional OBJ mesh replacing the procedural seabed.
  std::string mesh;
};

struct TrajectoryConfig {
  std::string preset = "down";  // "down" or "forward"
  double duration_s = 5.0;
  double speed = 0.5;
  double altitude = 2.0;
};

/// Everything `generate` needs. A config fully determines the outputs.
struct PipelineConfig {
  std::uint64_t seed = 0;
  Seeds seeds = Seeds::derive(0);
  SensorConfig sensor = SensorConfig::desk();
  double z_ground = 3.0;
  TerrainConfig terrain;
  scene::SceneSpec scene = scene::SceneSpec::defaults();
  /// No fish at all when true.
  bool static_scene = false;
  std::vector<boids::SchoolConfig> schools;
  TrajectoryConfig trajectory;
  /// Optional PGM tiled over the ground instead of the procedural pattern.
  std::string texture;
  double texels_per_metre = 40.0;
  /// Background noise events, Hz per pixel.
  double noise_rate = 0.0;

  static PipelineConfig defaults(std::uint64_t seed = 0);
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& c);
/// Missing keys take their defaults. A top-level "seed" re-derives every
/// stage seed not given explicitly under "seeds".
PipelineConfig pipeline_from_json(const nlohmann::json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

struct GenerateSummary {
  std::filesystem::path container;
  std::size_t frames = 0;
  std::size_t samples = 0;
  std::size_t events = 0;
  std::size_t fish = 0;
};

/// Scene -> boids -> render -> events -> container. Writes terrain.obj,
/// scene.txt, fish.txt, camera.txt, data.evz and data.props.json into `out`.
GenerateSummary run_generate(const PipelineConfig& config, const std::filesystem::path& out,
                             int threads);

}  // namespace evkit::cli
