#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "evkit/boids/school.hpp"
#include "evkit/event.hpp"
#include "evkit/image.hpp"
#include "evkit/render/camera.hpp"
#include "evkit/scene/scene.hpp"
#include "evkit/store/container.hpp"

namespace evkit::render {

/// Layer ids in the occlusion mask.
inline constexpr int kLayerSky = -1;
inline constexpr int kLayerGround = 0;
/// Fish k is drawn on layer kLayerFishBase + k.
inline constexpr int kLayerFishBase = 1;

/// Seabed appearance over the plane z = z_ground. Either a smooth procedural
/// pattern or a grayscale image tiled at `texels_per_metre`.
struct GroundTexture {
  struct Wave {
    double kn = 0.0;  // rad/m along north
    double ke = 0.0;  // rad/m along east
    double phase = 0.0;
  };

  std::vector<Wave> waves;
  std::optional<ImageD> image;
  double texels_per_metre = 40.0;

  /// Sum of seeded plane waves with wavelengths between 0.35 and 1.5 m.
  static GroundTexture procedural(std::uint64_t seed, int components = 8);
  /// Bilinear, wrap-around tiling of `img`.
  static GroundTexture tiled(ImageD img, double texels_per_metre);

  /// Intensity in [0, 1] at world (north, east) before decals.
  double base(double north, double east) const;
};

struct CoralDecal {
  double north = 0.0;
  double east = 0.0;
  double radius = 0.5;
  double phase = 0.0;
};

/// Flattens scene placements to decals on the ground plane.
std::vector<CoralDecal> decals_from_scene(const scene::SceneFile& scene);

struct RenderScene {
  double z_ground = 3.0;
  GroundTexture texture = GroundTexture::procedural(0);
  std::vector<CoralDecal> decals;
  double sky_intensity = 0.6;
  double fish_length = 0.25;

  /// Ground intensity including decals.
  double ground(double north, double east) const;
};

/// One fish at one instant.
struct FishState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

/// Linearly interpolated fish path.
struct FishTrack {
  std::vector<double> t;  // seconds, increasing
  std::vector<FishState> states;

  FishState at(double t_s) const;
};

/// Groups trajectory records by (school, boid), in that order.
std::vector<FishTrack> tracks_from_records(std::span<const boids::TrajectoryRecord> records);
std::vector<FishState> fish_at(std::span<const FishTrack> tracks, double t_s);

struct RenderedFrame {
  GrayFrame frame;
  Image<int> layers;
};

struct RenderedSample {
  GrayFrame frame;
  /// Displacement to the next frame; absent on the last sample.
  std::optional<FlowField> flow;
  Image<int> layers;
};

/// Renders one frame. Throws ContractError if the camera is at or below the
/// ground plane.
RenderedFrame render_frame(const RenderScene& scene, const Pinhole& cam, const CameraPose& pose,
                           std::span<const FishState> fish, TimeUs t);

/// Pixel (u, v) on the ground seen from pose a, reprojected into pose b.
/// Sky pixels are rotated at infinity. nullopt if the point leaves the front
/// of camera b.
std::optional<Vec2> background_motion(const RenderScene& scene, const Pinhole& cam,
                                      const CameraPose& a, const CameraPose& b, double u,
                                      double v);

/// Ground-truth flow from frame a to frame b. `layers_a` decides which layer
/// owns each pixel; fish pixels carry their projected centre displacement.
FlowField compute_flow(const RenderScene& scene, const Pinhole& cam, const CameraPose& a,
                       const CameraPose& b, std::span<const FishState> fish_a,
                       std::span<const FishState> fish_b, const Image<int>& layers_a, TimeUs t_a,
                       TimeUs t_b);

/// Frames at the given timestamps. Parallel per frame.
std::vector<RenderedFrame> render_frames(const RenderScene& scene, const CameraTrajectory& traj,
                                         std::span<const FishTrack> fish, const SensorConfig& sensor,
                                         std::span<const TimeUs> times, int threads = 1);

/// Timestamps t0 + round(k * 1e6 / fps) for k in [0, floor(duration * fps)).
std::vector<TimeUs> frame_times(TimeUs t0, double duration_s, double fps);

/// Frames at 1/fps with flow to the next frame.
std::vector<RenderedSample> render_sequence(const RenderScene& scene, const CameraTrajectory& traj,
                                            std::span<const FishTrack> fish,
                                            const SensorConfig& sensor, double duration_s,
                                            double fps, int threads = 1);

struct WarpResidual {
  double mean = 0.0;
  std::size_t pixels = 0;
};

/// Mean |I_b(x + flow(x)) - I_a(x)| over pixels whose target lies inside the
/// image. With layer masks, a pixel counts only when all four bilinear
/// neighbours of its target share its layer.
WarpResidual warp_check(const GrayFrame& a, const GrayFrame& b, const FlowField& flow,
                        const Image<int>* layers_a = nullptr,
                        const Image<int>* layers_b = nullptr);

/// Writes the container and a JSON sidecar. Throws ContractError when flows
/// do not chain frame k to frame k+1.
store::ContainerInfo compose_dataset(std::span<const RenderedSample> samples,
                                     const EventStream& events,
                                     const std::filesystem::path& path,
                                     const nlohmann::json& props = nlohmann::json::object(),
                                     const store::WriteOptions& options = {});

}  // namespace evkit::render
