#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <sys/wait.h>

#include "commands.hpp"
#include "evkit/boids/school.hpp"
#include "evkit/error.hpp"
#include "evkit/render/renderer.hpp"
#include "evkit/store/container.hpp"
#include "evkit/store/metadata.hpp"
#include "evkit/store/text_io.hpp"
#include "evkit/util/netpbm.hpp"
#include "pipeline.hpp"
#include "planted_scene.hpp"
#include "test_support.hpp"

namespace {

using namespace evkit;
using namespace evkit::cli;
namespace tsup = evkit::test_support;

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

PipelineConfig quick_config(std::uint64_t seed = 3) {
  PipelineConfig c = PipelineConfig::defaults(seed);
  c.trajectory.duration_s = 1.0;
  c.sensor = SensorConfig::desk(64, 64);
  return c;
}

int run(const std::string& args) {
  const int status = std::system((std::string(EVKIT_BIN) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string fmt_args(const std::string& cmd, const std::filesystem::path& a,
                     const std::filesystem::path& b, const std::string& rest) {
  return cmd + " " + a.string() + " " + b.string() + " " + rest;
}

TEST(Seeds, DerivedSeedsAreDistinctAndStable) {
  const Seeds a = Seeds::derive(11);
  const Seeds b = Seeds::derive(11);
  EXPECT_EQ(a.scene, b.scene);
  EXPECT_EQ(a.optimizer, b.optimizer);
  EXPECT_NE(a.scene, a.boids);
  EXPECT_NE(a.noise, a.optimizer);
  EXPECT_NE(Seeds::derive(12).scene, a.scene);
}

TEST(PipelineConfig, JsonRoundTrip) {
  PipelineConfig c = quick_config(5);
  c.noise_rate = 0.5;
  c.trajectory.preset = "forward";
  const auto j = to_json(c);
  EXPECT_EQ(to_json(pipeline_from_json(j)), j);
}

TEST(PipelineConfig, MissingKeysTakeDefaults) {
  const PipelineConfig c = pipeline_from_json(nlohmann::json{{"seed", 9}});
  EXPECT_EQ(to_json(c), to_json(PipelineConfig::defaults(9)));
}

TEST(PipelineConfig, RejectsBadValues) {
  PipelineConfig c = quick_config();
  c.trajectory.preset = "sideways";
  EXPECT_THROW(c.validate(), ContractError);
  c = quick_config();
  c.trajectory.altitude = 5.0;
  EXPECT_THROW(c.validate(), ContractError);
  c = quick_config();
  c.trajectory.duration_s = 0.05;
  EXPECT_THROW(c.validate(), ContractError);
}

TEST(PipelineConfig, MalformedFileIsFormatError) {
  tsup::TempDir dir;
  std::ofstream(dir / "c.json") << "{ not json";
  EXPECT_THROW(load_pipeline_config(dir / "c.json"), FormatError);
  EXPECT_THROW(load_pipeline_config(dir / "missing.json"), IoError);
}

TEST(Generate, WritesAllOutputsWithProvenance) {
  tsup::TempDir dir;
  const PipelineConfig cfg = quick_config();
  const auto s = run_generate(cfg, dir.path(), 1);
  for (const char* name : {"terrain.obj", "scene.txt", "fish.txt", "camera.txt", "data.evz",
                           "data.props.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / name)) << name;
  }
  EXPECT_EQ(s.frames, 20u);
  EXPECT_EQ(s.samples, 19u);
  EXPECT_GT(s.events, 0u);
  const auto props = store::read_sidecar(dir / "data.props.json");
  EXPECT_EQ(props.at("seeds").at("scene").get<std::uint64_t>(), cfg.seeds.scene);
  EXPECT_EQ(props.at("seeds").at("boids").get<std::uint64_t>(), cfg.seeds.boids);
  EXPECT_EQ(props.at("seeds").at("noise").get<std::uint64_t>(), cfg.seeds.noise);
  EXPECT_EQ(props.at("seeds").at("optimizer").get<std::uint64_t>(), cfg.seeds.optimizer);
  EXPECT_TRUE(props.contains("version"));
  EXPECT_EQ(props.at("config"), to_json(cfg));

  store::ContainerReader reader(s.container);
  EXPECT_EQ(reader.gray_count(), s.frames);
  EXPECT_EQ(reader.flow_count(), s.samples);
  EXPECT_EQ(reader.event_count(), s.events);
  EXPECT_EQ(reader.sensor(), cfg.sensor);
}

TEST(Generate, DeterministicAcrossRunsAndThreads) {
  tsup::TempDir a, b;
  const PipelineConfig cfg = quick_config(21);
  run_generate(cfg, a.path(), 1);
  run_generate(cfg, b.path(), 3);
  for (const char* name : {"terrain.obj", "scene.txt", "fish.txt", "camera.txt", "data.evz",
                           "data.props.json"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
}

TEST(Generate, StaticSceneHasNoFish) {
  tsup::TempDir dir;
  PipelineConfig cfg = quick_config();
  cfg.static_scene = true;
  const auto s = run_generate(cfg, dir.path(), 1);
  EXPECT_EQ(s.fish, 0u);
  EXPECT_TRUE(boids::read_trajectory(dir / "fish.txt").empty());
}

TEST(Generate, DynamicSceneShowsFishInFrames) {
  tsup::TempDir dir;
  PipelineConfig cfg = quick_config();
  const auto s = run_generate(cfg, dir.path(), 1);
  EXPECT_EQ(s.fish, 20u);
  const auto records = boids::read_trajectory(dir / "fish.txt");
  ASSERT_FALSE(records.empty());
  const auto tracks = render::tracks_from_records(records);

  // Re-render the recorded scene and count fish-layer pixels.
  render::RenderScene rs;
  rs.z_ground = cfg.z_ground;
  rs.texture = render::GroundTexture::procedural(cfg.seeds.scene);
  rs.decals = render::decals_from_scene(scene::read_scene(dir / "scene.txt"));
  rs.fish_length = cfg.schools.front().model_scale;
  render::PresetOptions opt;
  opt.duration_s = cfg.trajectory.duration_s;
  opt.z_ground = cfg.z_ground;
  opt.speed = cfg.trajectory.speed;
  opt.seed = cfg.seed;
  const auto traj = render::preset_down_looking(opt, cfg.trajectory.altitude);
  const std::vector<TimeUs> times{0, 500000};
  const auto frames = render::render_frames(rs, traj, tracks, cfg.sensor, times);
  std::size_t fish_pixels = 0;
  for (const auto& f : frames) {
    for (int l : f.layers.data()) fish_pixels += l >= render::kLayerFishBase ? 1 : 0;
  }
  EXPECT_GT(fish_pixels, 0u);

  // The stored frames match the re-render at t = 0.
  store::ContainerReader reader(s.container);
  EXPECT_EQ(reader.read_gray(0).intensity, frames[0].frame.intensity);
}

TEST(Generate, ErrorsCarryTheStage) {
  tsup::TempDir dir;
  PipelineConfig cfg = quick_config();
  cfg.texture = (dir / "missing.pgm").string();
  try {
    run_generate(cfg, dir.path(), 1);
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("[render]"), std::string::npos) << e.what();
  }
}

class PlantedContainer : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    seq_ = new tsup::PlantedSequence(tsup::make_planted_sequence(3.0, -2.0, 3));
    dir_ = new tsup::TempDir("evkit-planted");
    store::write_container(path(), seq_->events, seq_->frames, seq_->flows);
  }
  static void TearDownTestSuite() {
    delete dir_;
    delete seq_;
  }
  static std::filesystem::path path() { return *dir_ / "gt.evz"; }

  static inline tsup::PlantedSequence* seq_ = nullptr;
  static inline tsup::TempDir* dir_ = nullptr;
};

TEST_F(PlantedContainer, TrueFlowIsUniform) {
  for (const auto& f : seq_->flows) {
    for (int y = 0; y < f.height(); ++y) {
      for (int x = 0; x < f.width(); ++x) {
        ASSERT_NEAR(f.u(x, y), 3.0, 1e-6);
        ASSERT_NEAR(f.v(x, y), -2.0, 1e-6);
      }
    }
  }
}

TEST_F(PlantedContainer, EvaluateAgainstItselfIsZero) {
  EvaluateOptions opt;
  opt.pred = path();
  opt.gt = path();
  opt.budget = 0.0;
  opt.text = false;
  EXPECT_EQ(cmd_evaluate(opt), 0.0);
}

TEST_F(PlantedContainer, EstimateRecoversPlantedFlow) {
  EstimateOptions est;
  est.input = path();
  est.output = *dir_ / "pred.evz";
  est.estimator.schedule = {{1, 1}};
  EXPECT_EQ(cmd_estimate(est), seq_->flows.size());

  EvaluateOptions ev;
  ev.pred = est.output;
  ev.gt = path();
  ev.report = *dir_ / "report.json";
  ev.text = false;
  EXPECT_LT(cmd_evaluate(ev), 0.5);
  const auto report = nlohmann::json::parse(slurp(ev.report));
  EXPECT_EQ(report.at("slices").size(), seq_->flows.size());
  EXPECT_LT(report.at("aggregate").at("aae_deg").get<double>(), 5.0);

  // Events and frames are carried over unchanged.
  store::ContainerReader pred(est.output), gt(path());
  EXPECT_EQ(pred.read_all_events(), gt.read_all_events());
  EXPECT_EQ(pred.gray_count(), gt.gray_count());
}

TEST_F(PlantedContainer, BudgetZeroOnImperfectPredictionFails) {
  std::vector<FlowField> off = seq_->flows;
  for (auto& f : off) {
    for (double& u : f.u.data()) u += 0.25;
  }
  const auto pred = *dir_ / "off.evz";
  store::write_container(pred, seq_->events, seq_->frames, off);
  EvaluateOptions opt;
  opt.pred = pred;
  opt.gt = path();
  opt.text = false;
  opt.budget = 0.0;
  EXPECT_THROW(cmd_evaluate(opt), BudgetExceeded);
  opt.budget = 0.3;
  EXPECT_NEAR(cmd_evaluate(opt), 0.25, 1e-12);

  EXPECT_EQ(run(fmt_args("evaluate", pred, path(), "--budget 0")), 2);
  EXPECT_EQ(run(fmt_args("evaluate", path(), path(), "--budget 0")), 0);
}

TEST_F(PlantedContainer, EvaluateWithoutFlowIsAnError) {
  const auto bare = *dir_ / "bare.evz";
  store::write_container(bare, seq_->events, seq_->frames, {});
  EvaluateOptions opt;
  opt.pred = path();
  opt.gt = bare;
  opt.text = false;
  EXPECT_THROW(cmd_evaluate(opt), ContractError);
}

TEST_F(PlantedContainer, VisualizeModes) {
  VisualizeOptions opt;
  opt.input = path();
  opt.out_dir = *dir_ / "vis";
  EXPECT_EQ(cmd_visualize(opt), 3u);  // 300 ms at the default 100 ms window
  opt.mode = VisualMode::kFlowColor;
  EXPECT_EQ(cmd_visualize(opt), seq_->flows.size());
  opt.mode = VisualMode::kVolume;
  EXPECT_EQ(cmd_visualize(opt), seq_->events.size());
  std::ifstream ply(opt.out_dir / "events.ply");
  std::string line;
  std::size_t lines = 0;
  bool body = false;
  while (std::getline(ply, line)) {
    if (body) ++lines;
    body = body || line == "end_header";
  }
  EXPECT_EQ(lines, seq_->events.size());
  EXPECT_THROW(parse_visual_mode("hologram"), ContractError);
}

TEST(Estimate, LongerFitWindowResolvesSubPixelMotion) {
  // 0.8 px per interval: too little motion for contrast within one interval.
  const auto seq = tsup::make_planted_sequence(0.64, 0.48, 4);
  tsup::TempDir dir;
  store::write_container(dir / "gt.evz", seq.events, seq.frames, seq.flows);
  auto aee_for = [&](int span) {
    EstimateOptions est;
    est.input = dir / "gt.evz";
    est.output = dir / "pred.evz";
    est.estimator.schedule = {{1, 1}};
    est.span = span;
    cmd_estimate(est);
    EvaluateOptions ev;
    ev.pred = est.output;
    ev.gt = est.input;
    ev.text = false;
    return cmd_evaluate(ev);
  };
  const double single = aee_for(1);
  const double wide = aee_for(4);
  EXPECT_LT(wide, 0.3);
  EXPECT_LT(wide, single);
  EstimateOptions bad;
  bad.input = dir / "gt.evz";
  bad.output = dir / "x.evz";
  bad.span = 0;
  EXPECT_THROW(cmd_estimate(bad), ContractError);
}

TEST(Visualize, EmptyWindowGivesPlainGrayscale) {
  tsup::TempDir dir;
  const SensorConfig sensor = SensorConfig::desk(8, 6);
  ImageD img(8, 6);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) img(x, y) = (x + y) / 12.0;
  }
  const std::vector<GrayFrame> frames{{0, img}, {100000, img}, {200000, img}};
  const EventStream events(sensor, {{1, 1, 150000, 1}});
  store::write_container(dir / "c.evz", events, frames, {});
  VisualizeOptions opt;
  opt.input = dir / "c.evz";
  opt.out_dir = dir / "vis";
  ASSERT_EQ(cmd_visualize(opt), 2u);

  // PPM body is raw RGB after the three header lines.
  const std::string ppm = slurp(opt.out_dir / "overlay_00000.ppm");
  std::istringstream in(ppm);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  ASSERT_EQ(w, 8);
  ASSERT_EQ(h, 6);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      unsigned char rgb[3];
      in.read(reinterpret_cast<char*>(rgb), 3);
      EXPECT_EQ(rgb[0], rgb[1]);
      EXPECT_EQ(rgb[1], rgb[2]);
      EXPECT_EQ(rgb[0], static_cast<unsigned char>(std::lround(255.0 * img(x, y))));
    }
  }
}

TEST(ImportExport, TextRoundTrip) {
  tsup::TempDir dir;
  const EventStream ev = tsup::random_stream(4, 500, 32, 24, 100000);
  store::export_text(dir / "a.txt", ev);
  ImportOptions imp;
  imp.input = dir / "a.txt";
  imp.output = dir / "a.evz";
  imp.sensor = SensorConfig::desk(32, 24);
  EXPECT_EQ(cmd_import(imp), 500u);
  EXPECT_EQ(cmd_export(imp.output, dir / "b.txt"), 500u);
  EXPECT_EQ(slurp(dir / "a.txt"), slurp(dir / "b.txt"));
}

TEST(SimulateEvents, FromPgmDirectoryMatchesLibrary) {
  tsup::TempDir dir;
  std::filesystem::create_directories(dir / "frames");
  std::vector<GrayFrame> frames;
  for (int k = 0; k < 3; ++k) {
    ImageD img(16, 16);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) img(x, y) = ((x + 2 * k) % 8) < 4 ? 0.2 : 0.8;
    }
    write_pgm(dir / "frames" / ("f" + std::to_string(k) + ".pgm"), img);
    frames.push_back({std::llround(k * 1e6 / 17.0), read_pgm(dir / "frames" / ("f" + std::to_string(k) + ".pgm"))});
  }
  SimulateOptions opt;
  opt.input = dir / "frames";
  opt.output = dir / "ev.txt";
  opt.sensor = SensorConfig::desk(16, 16);
  const std::size_t n = cmd_simulate_events(opt);
  const auto expected = camsim::simulate_events(frames, opt.sensor);
  EXPECT_EQ(n, expected.size());
  EXPECT_GT(n, 0u);
  EXPECT_EQ(store::import_text(opt.output, opt.sensor), expected);
}

TEST(Encode, WritesOnePlanePerBinAndChannel) {
  tsup::TempDir dir;
  store::export_text(dir / "a.txt", tsup::random_stream(8, 200, 16, 16, 50000));
  EncodeOptions opt;
  opt.input = dir / "a.txt";
  opt.out_dir = dir / "enc";
  opt.sensor = SensorConfig::desk(16, 16);
  opt.encoder.bins = 4;
  EXPECT_EQ(cmd_encode(opt), 8u);
  opt.encoder.channel_mode = encode::ChannelMode::kSigned;
  EXPECT_EQ(cmd_encode(opt), 4u);
}

TEST(Binary, UsageErrors) {
  EXPECT_EQ(run("--version"), 0);
  EXPECT_NE(run(""), 0);
  EXPECT_NE(run("teleport"), 0);
  EXPECT_NE(run("visualize /nonexistent.evz --mode overlay --out /tmp"), 0);
}

}  // namespace
