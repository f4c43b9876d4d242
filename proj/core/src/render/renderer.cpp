#include "evkit/render/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <fmt/format.h>

#include "evkit/error.hpp"
#include "evkit/store/metadata.hpp"
#include "evkit/util/parallel.hpp"
#include "evkit/util/rng.hpp"

namespace evkit::render {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap_sample(const ImageD& img, double x, double y) {
  const int w = img.width(), h = img.height();
  const double fx = std::floor(x), fy = std::floor(y);
  const double ax = x - fx, ay = y - fy;
  auto wrap = [](long long v, int n) { return static_cast<int>(((v % n) + n) % n); };
  const int x0 = wrap(static_cast<long long>(fx), w), x1 = wrap(static_cast<long long>(fx) + 1, w);
  const int y0 = wrap(static_cast<long long>(fy), h), y1 = wrap(static_cast<long long>(fy) + 1, h);
  return (1 - ay) * ((1 - ax) * img(x0, y0) + ax * img(x1, y0)) +
         ay * ((1 - ax) * img(x0, y1) + ax * img(x1, y1));
}

struct FishSprite {
  bool visible = false;
  Vec2 center = Vec2::Zero();
  double depth = 0.0;
  double a = 0.0;  // semi-axis along heading, px
  double b = 0.0;
  Vec2 axis = Vec2::UnitX();
};

FishSprite project_fish(const Pinhole& cam, const CameraPose& pose, const Mat3& rt,
                        const FishState& fish, double length) {
  FishSprite s;
  const Vec3 pc = rt * (fish.position - pose.position);
  if (!(pc.z() > 1e-3)) return s;
  s.visible = true;
  s.depth = pc.z();
  s.center = Vec2(cam.f * pc.x() / pc.z() + cam.cx, cam.f * pc.y() / pc.z() + cam.cy);
  const Vec3 vc = rt * fish.velocity;
  // Image-plane direction of motion (derivative of the projection).
  const Vec2 dir(vc.x() - pc.x() * vc.z() / pc.z(), vc.y() - pc.y() * vc.z() / pc.z());
  if (dir.norm() > 1e-12) s.axis = dir.normalized();
  s.a = cam.f * length / (2.0 * pc.z());
  s.b = 0.35 * s.a;
  return s;
}

std::optional<Vec2> fish_center(const Pinhole& cam, const CameraPose& pose, const FishState& f) {
  return cam.project(pose.to_camera(f.position));
}

}  // namespace

GroundTexture GroundTexture::procedural(std::uint64_t seed, int components) {
  GroundTexture t;
  Rng rng(mix_seed(seed, 0x7e47));
  for (int i = 0; i < components; ++i) {
    const double theta = rng.uniform(0.0, kTwoPi);
    const double lambda = rng.uniform(0.35, 1.5);
    const double k = kTwoPi / lambda;
    t.waves.push_back({k * std::cos(theta), k * std::sin(theta), rng.uniform(0.0, kTwoPi)});
  }
  return t;
}

GroundTexture GroundTexture::tiled(ImageD img, double texels_per_metre) {
  if (img.width() < 1 || img.height() < 1) throw ContractError("empty ground texture");
  if (!(texels_per_metre > 0.0)) throw ContractError("texels_per_metre must be positive");
  GroundTexture t;
  t.image = std::move(img);
  t.texels_per_metre = texels_per_metre;
  return t;
}

double GroundTexture::base(double north, double east) const {
  if (image) return wrap_sample(*image, east * texels_per_metre, north * texels_per_metre);
  if (waves.empty()) return 0.5;
  double s = 0.0;
  for (const Wave& w : waves) s += std::sin(w.kn * north + w.ke * east + w.phase);
  s /= std::sqrt(0.5 * static_cast<double>(waves.size()));
  return 0.5 + 0.35 * std::tanh(s);
}

std::vector<CoralDecal> decals_from_scene(const scene::SceneFile& scene) {
  std::vector<CoralDecal> out;
  out.reserve(scene.placements.size());
  for (std::size_t i = 0; i < scene.placements.size(); ++i) {
    const scene::Placement& p = scene.placements[i];
    const std::uint64_t h = mix_seed(scene.spec.seed, i);
    const double phase = static_cast<double>(h >> 11) * 0x1.0p-53 * kTwoPi;
    out.push_back({p.position.x(), p.position.y(), scene::placement_radius(scene.spec, p), phase});
  }
  return out;
}

double RenderScene::ground(double north, double east) const {
  double v = texture.base(north, east);
  for (const CoralDecal& d : decals) {
    const double dn = north - d.north, de = east - d.east;
    const double r2 = dn * dn + de * de;
    if (r2 >= d.radius * d.radius) continue;
    const double q = 1.0 - r2 / (d.radius * d.radius);
    const double w = q * q;
    const double lambda = std::max(0.5 * d.radius, 0.35);
    const double coral = 0.5 + 0.4 * std::cos(kTwoPi * std::sqrt(r2) / lambda + d.phase);
    v = (1.0 - w) * v + w * coral;
  }
  return v;
}

FishState FishTrack::at(double t_s) const {
  if (t.empty()) throw ContractError("empty fish track");
  if (t_s <= t.front()) return states.front();
  if (t_s >= t.back()) return states.back();
  const auto it = std::upper_bound(t.begin(), t.end(), t_s);
  const std::size_t j = static_cast<std::size_t>(it - t.begin());
  const double w = (t_s - t[j - 1]) / (t[j] - t[j - 1]);
  return {(1.0 - w) * states[j - 1].position + w * states[j].position,
          (1.0 - w) * states[j - 1].velocity + w * states[j].velocity};
}

std::vector<FishTrack> tracks_from_records(std::span<const boids::TrajectoryRecord> records) {
  std::map<std::pair<int, int>, std::vector<const boids::TrajectoryRecord*>> groups;
  for (const auto& r : records) groups[{r.school, r.boid}].push_back(&r);
  std::vector<FishTrack> out;
  out.reserve(groups.size());
  for (auto& [key, recs] : groups) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const auto* l, const auto* r) { return l->t < r->t; });
    FishTrack tr;
    for (const auto* r : recs) {
      if (!tr.t.empty() && r->t <= tr.t.back()) continue;
      tr.t.push_back(r->t);
      tr.states.push_back({r->state.position, r->state.velocity});
    }
    out.push_back(std::move(tr));
  }
  return out;
}

std::vector<FishState> fish_at(std::span<const FishTrack> tracks, double t_s) {
  std::vector<FishState> out;
  out.reserve(tracks.size());
  for (const FishTrack& tr : tracks) out.push_back(tr.at(t_s));
  return out;
}

RenderedFrame render_frame(const RenderScene& scene, const Pinhole& cam, const CameraPose& pose,
                           std::span<const FishState> fish, TimeUs t) {
  if (!(pose.position.z() < scene.z_ground)) {
    throw ContractError(fmt::format("camera at depth {:.3f} m is not above the ground plane at {:.3f} m",
                                    pose.position.z(), scene.z_ground));
  }
  const int w = cam.width, h = cam.height;
  const Mat3 r = pose.rotation();
  const Mat3 rt = r.transpose();
  RenderedFrame out{GrayFrame{t, ImageD(w, h, 0.0)}, Image<int>(w, h, kLayerSky)};
  ImageD& img = out.frame.intensity;
  ImageD depth(w, h, std::numeric_limits<double>::infinity());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec3 d = r * cam.ray(x, y);
      if (d.z() > 1e-12) {
        const double s = (scene.z_ground - pose.position.z()) / d.z();
        const Vec3 p = pose.position + s * d;
        img(x, y) = scene.ground(p.x(), p.y());
        depth(x, y) = s;
        out.layers(x, y) = kLayerGround;
      } else {
        img(x, y) = scene.sky_intensity;
      }
    }
  }
  for (std::size_t k = 0; k < fish.size(); ++k) {
    const FishSprite s = project_fish(cam, pose, rt, fish[k], scene.fish_length);
    if (!s.visible) continue;
    const int x0 = std::max(0, static_cast<int>(std::floor(s.center.x() - s.a)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(s.center.x() + s.a)));
    const int y0 = std::max(0, static_cast<int>(std::floor(s.center.y() - s.a)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(s.center.y() + s.a)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (s.depth >= depth(x, y)) continue;
        const Vec2 q = Vec2(x, y) - s.center;
        const double xs = q.dot(s.axis) / s.a;
        const double ys = (s.axis.x() * q.y() - s.axis.y() * q.x()) / s.b;
        if (xs * xs + ys * ys > 1.0) continue;
        depth(x, y) = s.depth;
        out.layers(x, y) = kLayerFishBase + static_cast<int>(k);
        img(x, y) = 0.25 + 0.5 * (0.5 + 0.5 * std::cos(3.0 * std::numbers::pi * xs)) *
                               (1.0 - 0.3 * ys * ys);
      }
    }
  }
  return out;
}

std::optional<Vec2> background_motion(const RenderScene& scene, const Pinhole& cam,
                                      const CameraPose& a, const CameraPose& b, double u,
                                      double v) {
  const Vec3 d = a.to_world_dir(cam.ray(u, v));
  if (d.z() > 1e-12) {
    const double s = (scene.z_ground - a.position.z()) / d.z();
    return cam.project(b.to_camera(a.position + s * d));
  }
  return cam.project(b.rotation().transpose() * d);
}

FlowField compute_flow(const RenderScene& scene, const Pinhole& cam, const CameraPose& a,
                       const CameraPose& b, std::span<const FishState> fish_a,
                       std::span<const FishState> fish_b, const Image<int>& layers_a, TimeUs t_a,
                       TimeUs t_b) {
  if (fish_a.size() != fish_b.size()) throw ContractError("fish lists differ between frames");
  FlowField flow(t_a, t_b, cam.width, cam.height);
  // Reprojecting through an unchanged pose would leave rounding noise.
  const bool still = a == b;
  std::vector<std::optional<Vec2>> fish_d(fish_a.size());
  for (std::size_t k = 0; k < fish_a.size(); ++k) {
    const auto ca = fish_center(cam, a, fish_a[k]);
    const auto cb = fish_center(cam, b, fish_b[k]);
    if (ca && cb) fish_d[k] = *cb - *ca;
  }
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const int layer = layers_a(x, y);
      Vec2 d = Vec2::Zero();
      if (layer >= kLayerFishBase) {
        const auto& fd = fish_d[static_cast<std::size_t>(layer - kLayerFishBase)];
        if (fd) d = *fd;
      } else if (still) {
        continue;
      } else if (auto m = background_motion(scene, cam, a, b, x, y)) {
        d = *m - Vec2(x, y);
      }
      flow.u(x, y) = d.x();
      flow.v(x, y) = d.y();
    }
  }
  return flow;
}

std::vector<RenderedFrame> render_frames(const RenderScene& scene, const CameraTrajectory& traj,
                                         std::span<const FishTrack> fish, const SensorConfig& sensor,
                                         std::span<const TimeUs> times, int threads) {
  const Pinhole cam = Pinhole::from_sensor(sensor);
  std::vector<RenderedFrame> out(times.size());
  parallel_for(times.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const auto f = fish_at(fish, us_to_s(times[k]));
      out[k] = render_frame(scene, cam, traj.pose_at(times[k]), f, times[k]);
    }
  });
  return out;
}

std::vector<TimeUs> frame_times(TimeUs t0, double duration_s, double fps) {
  if (!(fps > 0.0) || !(duration_s >= 0.0)) throw ContractError("fps and duration must be positive");
  const auto n = static_cast<std::size_t>(std::floor(duration_s * fps + 1e-9));
  std::vector<TimeUs> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    t[k] = t0 + std::llround(static_cast<double>(k) * 1e6 / fps);
  }
  return t;
}

std::vector<RenderedSample> render_sequence(const RenderScene& scene, const CameraTrajectory& traj,
                                            std::span<const FishTrack> fish,
                                            const SensorConfig& sensor, double duration_s,
                                            double fps, int threads) {
  const std::vector<TimeUs> times = frame_times(traj.span().begin, duration_s, fps);
  std::vector<RenderedFrame> frames = render_frames(scene, traj, fish, sensor, times, threads);
  const Pinhole cam = Pinhole::from_sensor(sensor);
  std::vector<RenderedSample> out(frames.size());
  parallel_for(frames.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      if (k + 1 < frames.size()) {
        const auto fa = fish_at(fish, us_to_s(times[k]));
        const auto fb = fish_at(fish, us_to_s(times[k + 1]));
        out[k].flow = compute_flow(scene, cam, traj.pose_at(times[k]), traj.pose_at(times[k + 1]),
                                   fa, fb, frames[k].layers, times[k], times[k + 1]);
      }
    }
  });
  for (std::size_t k = 0; k < frames.size(); ++k) {
    out[k].frame = std::move(frames[k].frame);
    out[k].layers = std::move(frames[k].layers);
  }
  return out;
}

WarpResidual warp_check(const GrayFrame& a, const GrayFrame& b, const FlowField& flow,
                        const Image<int>* layers_a, const Image<int>* layers_b) {
  const int w = a.width(), h = a.height();
  if (b.width() != w || b.height() != h || flow.width() != w || flow.height() != h) {
    throw ContractError("warp_check inputs differ in size");
  }
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double tx = x + flow.u(x, y), ty = y + flow.v(x, y);
      double val = 0.0;
      if (!sample_bilinear_inside(b.intensity, tx, ty, val)) continue;
      if (layers_a != nullptr && layers_b != nullptr) {
        const int own = (*layers_a)(x, y);
        const int x0 = static_cast<int>(std::floor(tx)), y0 = static_cast<int>(std::floor(ty));
        const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
        if ((*layers_b)(x0, y0) != own || (*layers_b)(x1, y0) != own ||
            (*layers_b)(x0, y1) != own || (*layers_b)(x1, y1) != own) {
          continue;
        }
      }
      sum += std::abs(val - a.intensity(x, y));
      ++n;
    }
  }
  return {n > 0 ? sum / static_cast<double>(n) : 0.0, n};
}

store::ContainerInfo compose_dataset(std::span<const RenderedSample> samples,
                                     const EventStream& events,
                                     const std::filesystem::path& path,
                                     const nlohmann::json& props,
                                     const store::WriteOptions& options) {
  std::vector<GrayFrame> frames;
  std::vector<FlowField> flows;
  frames.reserve(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    frames.push_back(samples[k].frame);
    if (k + 1 == samples.size()) continue;
    const auto& f = samples[k].flow;
    if (!f || f->t0 != samples[k].frame.t || f->t1 != samples[k + 1].frame.t) {
      throw ContractError(fmt::format("flow cadence does not match frames at sample {}", k));
    }
    flows.push_back(*f);
  }
  store::ContainerInfo info = store::write_container(path, events, frames, flows, options);
  store::write_sidecar(store::sidecar_path(path), props);
  return info;
}

}  // namespace evkit::render
