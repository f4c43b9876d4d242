#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "evkit/camsim/simulator.hpp"
#include "evkit/error.hpp"
#include "evkit/render/renderer.hpp"
#include "evkit/store/container.hpp"
#include "evkit/store/metadata.hpp"
#include "test_support.hpp"

using namespace evkit;
using namespace evkit::render;
namespace tsup = evkit::test_support;

namespace {

SensorConfig sensor(int w = 64, int h = 48) { return SensorConfig::desk(w, h); }

CameraTrajectory still(Vec3 p, double yaw = 0.0, double tilt = 0.0) {
  return CameraTrajectory({{0, p, yaw}, {10'000'000, p, yaw}}, tilt);
}

// Independent reprojection: rotation written out in scalar form, ground
// intersection and projection done by hand.
std::optional<Vec2> oracle_motion(double z_ground, const Pinhole& cam, const CameraPose& a,
                                  const CameraPose& b, double u, double v) {
  auto axes = [](const CameraPose& p) {
    const double cy = std::cos(p.yaw), sy = std::sin(p.yaw);
    const double ct = std::cos(p.tilt), st = std::sin(p.tilt);
    // Camera x: east rotated by yaw; y: south tilted; z: optical axis.
    const Vec3 x(-sy, cy, 0.0);
    const Vec3 y(-ct * cy, -ct * sy, st);
    const Vec3 z(st * cy, st * sy, ct);
    return std::array<Vec3, 3>{x, y, z};
  };
  const auto ea = axes(a);
  const double xn = (u - cam.cx) / cam.f, yn = (v - cam.cy) / cam.f;
  const Vec3 d = xn * ea[0] + yn * ea[1] + ea[2];
  if (d.z() <= 0.0) return std::nullopt;
  const Vec3 g = a.position + d * ((z_ground - a.position.z()) / d.z());
  const auto eb = axes(b);
  const Vec3 r = g - b.position;
  const double zc = r.dot(eb[2]);
  if (zc <= 0.0) return std::nullopt;
  return Vec2(cam.f * r.dot(eb[0]) / zc + cam.cx, cam.f * r.dot(eb[1]) / zc + cam.cy);
}

}  // namespace

TEST(Camera, PinholeFromSensor) {
  const Pinhole p = Pinhole::from_sensor(sensor(128, 128));
  EXPECT_DOUBLE_EQ(p.f, 64.0 / std::tan(35.0 * std::numbers::pi / 180.0));
  EXPECT_DOUBLE_EQ(p.cx, 63.5);
  const Vec2 c = *p.project(Vec3(0, 0, 2));
  EXPECT_EQ(c, Vec2(63.5, 63.5));
  EXPECT_FALSE(p.project(Vec3(0, 0, -1)).has_value());
  const Vec3 r = p.ray(10.0, 20.0);
  EXPECT_NEAR((*p.project(3.0 * r) - Vec2(10, 20)).norm(), 0.0, 1e-12);
}

TEST(Camera, RotationIsOrthonormalAndAxesMatchConvention) {
  CameraPose pose;
  Mat3 r = pose.rotation();
  EXPECT_NEAR((r.col(0) - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);  // image right = east
  EXPECT_NEAR((r.col(1) - Vec3(-1, 0, 0)).norm(), 0.0, 1e-15); // image down = south
  EXPECT_NEAR((r.col(2) - Vec3(0, 0, 1)).norm(), 0.0, 1e-15);  // optical axis = down
  pose.yaw = 0.7;
  pose.tilt = 0.5;
  r = pose.rotation();
  EXPECT_NEAR((r.transpose() * r - Mat3::Identity()).norm(), 0.0, 1e-14);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-14);
  EXPECT_GT(r.col(2).head<2>().dot(Vec2(std::cos(0.7), std::sin(0.7))), 0.0);
}

TEST(Camera, TrajectoryValidationAndInterpolation) {
  EXPECT_THROW(CameraTrajectory({{0, Vec3::Zero(), 0}, {0, Vec3::Zero(), 0}}, 0.0), ContractError);
  EXPECT_THROW(CameraTrajectory({{0, Vec3::Zero(), 0}, {1'000'000, Vec3(0.9, 0, 0), 0}}, 0.0),
               ContractError);
  const CameraTrajectory t({{0, Vec3::Zero(), 0}, {1'000'000, Vec3(0.8, 0, 0), 1.0}}, 0.0);
  EXPECT_NEAR(t.max_speed(), 0.8, 1e-12);
  const CameraPose p = t.pose_at(250'000);
  EXPECT_NEAR(p.position.x(), 0.2, 1e-12);
  EXPECT_NEAR(p.yaw, 0.25, 1e-12);
  EXPECT_THROW(t.pose_at(1'000'001), RangeError);
  EXPECT_THROW(t.pose_at(-1), RangeError);
}

TEST(Camera, PresetsRespectSpeedLimitAndShape) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PresetOptions opt;
    opt.seed = seed;
    opt.duration_s = 45.0;
    const CameraTrajectory down = preset_down_looking(opt);
    const CameraTrajectory fwd = preset_forward_looking(opt);
    EXPECT_LE(down.max_speed(), 0.85);
    EXPECT_LE(fwd.max_speed(), 0.85);
    EXPECT_GE(down.span().end, 45'000'001);
    for (const auto& s : down.samples()) EXPECT_DOUBLE_EQ(s.position.z(), 1.0);
    double zmin = 1e9, zmax = -1e9;
    for (const auto& s : fwd.samples()) {
      zmin = std::min(zmin, s.position.z());
      zmax = std::max(zmax, s.position.z());
    }
    EXPECT_GT(zmax - zmin, 0.5);
    EXPECT_NEAR(fwd.tilt(), 35.0 * std::numbers::pi / 180.0, 1e-15);
  }
}

TEST(Render, StaticSceneZeroFlow) {
  RenderScene scene;
  const auto seq = render_sequence(scene, still(Vec3(0, 0, 1)), {}, sensor(), 0.5, 20.0);
  ASSERT_EQ(seq.size(), 10u);
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
    ASSERT_TRUE(seq[k].flow.has_value());
    for (double v : seq[k].flow->u.data()) EXPECT_EQ(v, 0.0);
    for (double v : seq[k].flow->v.data()) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(seq[k].frame.intensity, seq[k + 1].frame.intensity);
  }
  EXPECT_FALSE(seq.back().flow.has_value());
}

TEST(Render, TranslationGivesUniformFlow) {
  RenderScene scene;
  const Pinhole cam = Pinhole::from_sensor(sensor());
  const double z = scene.z_ground - 1.0;
  for (double delta : {0.01, 0.05, -0.03}) {
    CameraPose a{Vec3(0, 0, 1), 0.0, 0.0};
    CameraPose b{Vec3(delta, 0, 1), 0.0, 0.0};
    const RenderedFrame fa = render_frame(scene, cam, a, {}, 0);
    const FlowField f = compute_flow(scene, cam, a, b, {}, {}, fa.layers, 0, 50'000);
    for (int y = 0; y < cam.height; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        ASSERT_NEAR(f.v(x, y), cam.f * delta / z, 1e-9);
        ASSERT_NEAR(f.u(x, y), 0.0, 1e-9);
      }
    }
    // Eastward motion moves the ground left in the image.
    b.position = Vec3(0, delta, 1);
    const FlowField g = compute_flow(scene, cam, a, b, {}, {}, fa.layers, 0, 50'000);
    EXPECT_NEAR(g.u(5, 7), -cam.f * delta / z, 1e-9);
  }
}

TEST(Render, FlowMatchesIndependentReprojection) {
  RenderScene scene;
  const Pinhole cam = Pinhole::from_sensor(sensor());
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    PresetOptions opt;
    opt.seed = trial;
    const CameraTrajectory traj = trial % 2 ? preset_forward_looking(opt) : preset_down_looking(opt);
    const TimeUs ta = static_cast<TimeUs>(rng.below(4'000'000));
    const TimeUs tb = ta + 50'000;
    const CameraPose a = traj.pose_at(ta), b = traj.pose_at(tb);
    const RenderedFrame fa = render_frame(scene, cam, a, {}, ta);
    const FlowField f = compute_flow(scene, cam, a, b, {}, {}, fa.layers, ta, tb);
    for (int k = 0; k < 50; ++k) {
      const int x = static_cast<int>(rng.below(64)), y = static_cast<int>(rng.below(48));
      const auto o = oracle_motion(scene.z_ground, cam, a, b, x, y);
      if (!o || fa.layers(x, y) != kLayerGround) continue;
      EXPECT_NEAR(f.u(x, y), o->x() - x, 1e-3);
      EXPECT_NEAR(f.v(x, y), o->y() - y, 1e-3);
    }
  }
}

TEST(Render, FlowRateMatchesCentralDifferenceOfProjection) {
  // d/dt of the projection of a fixed ground point, by central differences,
  // times a short interval equals the flow over that interval.
  RenderScene scene;
  const Pinhole cam = Pinhole::from_sensor(sensor());
  PresetOptions opt;
  opt.seed = 3;
  const CameraTrajectory traj = preset_forward_looking(opt);
  const TimeUs t = 2'000'005, h = 500, dt = 200;
  const CameraPose a = traj.pose_at(t);
  const RenderedFrame fa = render_frame(scene, cam, a, {}, t);
  const FlowField f = compute_flow(scene, cam, a, traj.pose_at(t + dt), {}, {}, fa.layers, t, t + dt);
  for (int y = 30; y < 48; y += 5) {
    for (int x = 0; x < 64; x += 9) {
      const Vec3 d = a.to_world_dir(cam.ray(x, y));
      const Vec3 g = a.position + d * ((scene.z_ground - a.position.z()) / d.z());
      const Vec2 p1 = *cam.project(traj.pose_at(t + h).to_camera(g));
      const Vec2 p0 = *cam.project(traj.pose_at(t - h).to_camera(g));
      const Vec2 rate = (p1 - p0) / (2.0 * h);
      EXPECT_NEAR(f.u(x, y), rate.x() * dt, 1e-3);
      EXPECT_NEAR(f.v(x, y), rate.y() * dt, 1e-3);
    }
  }
}

TEST(Render, CameraBelowGroundThrows) {
  RenderScene scene;
  const Pinhole cam = Pinhole::from_sensor(sensor());
  EXPECT_THROW(render_frame(scene, cam, {Vec3(0, 0, 3.0), 0, 0}, {}, 0), ContractError);
  EXPECT_THROW(render_frame(scene, cam, {Vec3(0, 0, 3.5), 0, 0}, {}, 0), ContractError);
}

TEST(Render, FishOccludeGroundAndCarryTheirOwnFlow) {
  RenderScene scene;
  scene.fish_length = 0.4;
  const Pinhole cam = Pinhole::from_sensor(sensor());
  const CameraPose pose{Vec3(0, 0, 1), 0.0, 0.0};
  const std::vector<FishState> fa{{Vec3(0, 0, 2), Vec3(0.5, 0, 0)}};
  const std::vector<FishState> fb{{Vec3(0.025, 0, 2), Vec3(0.5, 0, 0)}};
  const RenderedFrame r = render_frame(scene, cam, pose, fa, 0);
  const Vec2 c = *cam.project(pose.to_camera(fa[0].position));
  const int cx = static_cast<int>(std::lround(c.x())), cy = static_cast<int>(std::lround(c.y()));
  ASSERT_EQ(r.layers(cx, cy), kLayerFishBase);
  EXPECT_EQ(r.layers(0, 0), kLayerGround);
  const FlowField f = compute_flow(scene, cam, pose, pose, fa, fb, r.layers, 0, 50'000);
  EXPECT_NEAR(f.v(cx, cy), -cam.f * 0.025, 1e-9);  // 1 m in front, north is image up
  EXPECT_EQ(f.u(0, 0), 0.0);
  EXPECT_EQ(f.v(0, 0), 0.0);
  std::size_t fish_px = 0;
  for (int v : r.layers.data()) fish_px += v == kLayerFishBase;
  // Ellipse area pi * a * b with a = f L / 2z.
  const double a = cam.f * 0.4 / 2.0;
  EXPECT_NEAR(static_cast<double>(fish_px), std::numbers::pi * a * 0.35 * a, 0.15 * std::numbers::pi * a * 0.35 * a);
}

TEST(Render, NearestFishWins) {
  RenderScene scene;
  const Pinhole cam = Pinhole::from_sensor(sensor());
  const CameraPose pose{Vec3(0, 0, 1), 0.0, 0.0};
  const std::vector<FishState> fish{{Vec3(0, 0, 2.5), Vec3(0.5, 0, 0)}, {Vec3(0, 0, 1.8), Vec3(0, 0.5, 0)}};
  const RenderedFrame r = render_frame(scene, cam, pose, fish, 0);
  EXPECT_EQ(r.layers(32, 24), kLayerFishBase + 1);
}

TEST(Render, SkyVisibleWhenTiltedAndFlowRotatesAtInfinity) {
  RenderScene scene;
  const Pinhole cam = Pinhole::from_sensor(sensor());
  const CameraPose a{Vec3(0, 0, 1), 0.0, 1.3};
  const RenderedFrame r = render_frame(scene, cam, a, {}, 0);
  EXPECT_EQ(r.layers(32, 0), kLayerSky);
  EXPECT_DOUBLE_EQ(r.frame.intensity(32, 0), scene.sky_intensity);
  CameraPose b = a;
  b.position.x() += 0.3;  // translation does not move points at infinity
  const FlowField f = compute_flow(scene, cam, a, b, {}, {}, r.layers, 0, 1);
  EXPECT_NEAR(f.u(32, 0), 0.0, 1e-9);
  EXPECT_NEAR(f.v(32, 0), 0.0, 1e-9);
}

TEST(Render, DeterministicAcrossRunsAndThreads) {
  RenderScene scene;
  scene.texture = GroundTexture::procedural(9);
  PresetOptions opt;
  opt.seed = 9;
  const CameraTrajectory traj = preset_forward_looking(opt);
  FishTrack tr{{0.0, 5.0}, {{Vec3(1, 0, 2.2), Vec3(0.2, 0, 0)}, {Vec3(2, 0, 2.2), Vec3(0.2, 0, 0)}}};
  const std::vector<FishTrack> fish{tr};
  const auto a = render_sequence(scene, traj, fish, sensor(), 1.0, 20.0, 1);
  const auto b = render_sequence(scene, traj, fish, sensor(), 1.0, 20.0, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].frame, b[k].frame);
    EXPECT_EQ(a[k].flow, b[k].flow);
    EXPECT_EQ(a[k].layers, b[k].layers);
  }
}

TEST(Render, FrameTimesFencepost) {
  EXPECT_EQ(frame_times(0, 5.0, 20.0).size(), 100u);
  EXPECT_EQ(frame_times(0, 45.0, 20.0).size(), 900u);
  const auto t = frame_times(7, 1.0, 3.0);
  EXPECT_EQ(t, (std::vector<TimeUs>{7, 333'340, 666'674}));
  EXPECT_THROW(frame_times(0, 1.0, 0.0), ContractError);
}

TEST(Texture, ProceduralRangeAndTiledWrap) {
  const GroundTexture g = GroundTexture::procedural(3);
  ASSERT_EQ(g.waves.size(), 8u);
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    const double v = g.base(rng.uniform(-50, 50), rng.uniform(-50, 50));
    EXPECT_GT(v, 0.14);
    EXPECT_LT(v, 0.86);
  }
  ImageD img(4, 2);
  for (int i = 0; i < 8; ++i) img.data()[static_cast<std::size_t>(i)] = i / 8.0;
  const GroundTexture t = GroundTexture::tiled(img, 2.0);
  EXPECT_DOUBLE_EQ(t.base(0.5, 1.0), img(2, 1));
  EXPECT_DOUBLE_EQ(t.base(0.5 + 1.0, 1.0 + 2.0), img(2, 1));  // wraps
  EXPECT_THROW(GroundTexture::tiled(img, 0.0), ContractError);
}

TEST(Texture, DecalsFromSceneSitAtPlacements) {
  scene::SceneFile sf{scene::SceneSpec::defaults(2), {}};
  scene::Placement p;
  p.model_id = sf.spec.catalogue.front().id;
  p.position = Vec3(1.5, -2.0, 3.0);
  p.scale = 1.0;
  sf.placements.push_back(p);
  const auto d = decals_from_scene(sf);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].north, 1.5);
  EXPECT_EQ(d[0].east, -2.0);
  EXPECT_EQ(d[0].radius, sf.spec.catalogue.front().radius);
  RenderScene with, without;
  with.decals = d;
  EXPECT_EQ(with.ground(10, 10), without.ground(10, 10));
}

TEST(Fish, TracksFromRecordsInterpolate) {
  std::vector<boids::TrajectoryRecord> recs;
  for (int k = 0; k < 3; ++k) {
    for (int b = 0; b < 2; ++b) {
      recs.push_back({k * 0.1, 1, b, {Vec3(k + b, 0, 2), Vec3(1, 0, 0)}});
    }
  }
  recs.push_back({0.0, 0, 0, {Vec3(9, 9, 9), Vec3::Zero()}});
  const auto tracks = tracks_from_records(recs);
  ASSERT_EQ(tracks.size(), 3u);
  EXPECT_EQ(tracks[0].states[0].position, Vec3(9, 9, 9));
  EXPECT_NEAR(tracks[2].at(0.15).position.x(), 2.5, 1e-12);
  EXPECT_EQ(tracks[2].at(-1.0).position.x(), 1.0);
  EXPECT_EQ(tracks[2].at(9.0).position.x(), 3.0);
}

TEST(WarpCheck, ZeroFlowIdenticalFrames) {
  RenderScene scene;
  const Pinhole cam = Pinhole::from_sensor(sensor());
  const RenderedFrame r = render_frame(scene, cam, {Vec3(0, 0, 1), 0, 0}, {}, 0);
  const WarpResidual w = warp_check(r.frame, r.frame, FlowField(0, 1, 64, 48));
  EXPECT_EQ(w.mean, 0.0);
  EXPECT_EQ(w.pixels, 64u * 48u);
}

TEST(WarpCheck, TrueFlowBeatsCorruptedFlow) {
  RenderScene scene;
  PresetOptions opt;
  opt.seed = 2;
  const CameraTrajectory traj = preset_down_looking(opt);
  FishTrack tr{{0.0, 5.0}, {{Vec3(0, 0, 2.3), Vec3(0.3, 0.1, 0)}, {Vec3(1.5, 0.5, 2.3), Vec3(0.3, 0.1, 0)}}};
  const std::vector<FishTrack> fish{tr};
  const auto seq = render_sequence(scene, traj, fish, sensor(128, 96), 0.5, 20.0);
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
    const WarpResidual good =
        warp_check(seq[k].frame, seq[k + 1].frame, *seq[k].flow, &seq[k].layers, &seq[k + 1].layers);
    EXPECT_LT(good.mean, 0.02);
    FlowField bad = *seq[k].flow;
    for (double& u : bad.u.data()) u += 5.0;
    for (double& v : bad.v.data()) v += 5.0;
    const WarpResidual worse =
        warp_check(seq[k].frame, seq[k + 1].frame, bad, &seq[k].layers, &seq[k + 1].layers);
    EXPECT_GT(worse.mean, good.mean);
  }
  EXPECT_THROW(warp_check(seq[0].frame, seq[1].frame, FlowField(0, 1, 3, 3)), ContractError);
}

TEST(Dataset, FiveSecondsAtTwentyHertz) {
  tsup::TempDir dir;
  RenderScene scene;
  PresetOptions opt;
  const CameraTrajectory traj = preset_down_looking(opt);
  const SensorConfig s = sensor(32, 24);
  const auto seq = render_sequence(scene, traj, {}, s, 5.0, 20.0);
  ASSERT_EQ(seq.size(), 100u);
  std::vector<GrayFrame> frames;
  for (const auto& r : seq) frames.push_back(r.frame);
  const EventStream ev = camsim::simulate_events(frames, s);
  const nlohmann::json props{{"seed", 0}, {"preset", "down"}};
  compose_dataset(seq, ev, dir / "d.evz", props);
  const store::ContainerReader rd(dir / "d.evz");
  EXPECT_EQ(rd.gray_count(), 100u);
  EXPECT_EQ(rd.flow_count(), 99u);
  EXPECT_EQ(store::iterate(rd, store::StrideMode::kGrayIndex, 1).size(), 99u);
  EXPECT_EQ(rd.read_all_events(), ev);
  EXPECT_EQ(rd.read_gray(42), seq[42].frame);
  EXPECT_EQ(rd.read_flow(42), *seq[42].flow);
  EXPECT_EQ(store::read_sidecar(store::sidecar_path(dir / "d.evz")), props);
}

TEST(Dataset, CadenceMismatchThrows) {
  tsup::TempDir dir;
  RenderScene scene;
  const SensorConfig s = sensor(16, 16);
  auto seq = render_sequence(scene, still(Vec3(0, 0, 1)), {}, s, 0.3, 20.0);
  seq[2].flow->t1 += 1;
  EXPECT_THROW(compose_dataset(seq, EventStream(s, {}), dir / "x.evz"), ContractError);
  seq[2].flow.reset();
  EXPECT_THROW(compose_dataset(seq, EventStream(s, {}), dir / "x.evz"), ContractError);
}
