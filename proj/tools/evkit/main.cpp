#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"
#include "evkit/error.hpp"
#include "evkit/store/metadata.hpp"
#include "evkit/util/parallel.hpp"
#include "evkit/util/rng.hpp"
#include "pipeline.hpp"

namespace {

using namespace evkit;
using namespace evkit::cli;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  int threads = default_thread_count();
  std::string out;
};

void reseed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.seeds = Seeds::derive(seed);
  cfg.scene.seed = cfg.seeds.scene;
  for (std::size_t k = 0; k < cfg.schools.size(); ++k) {
    cfg.schools[k].seed = k == 0 ? cfg.seeds.boids : mix_seed(cfg.seeds.boids, k);
  }
}

PipelineConfig pipeline_config(const Globals& g) {
  PipelineConfig cfg = g.config.empty() ? PipelineConfig::defaults(g.seed.value_or(0))
                                        : load_pipeline_config(g.config);
  if (g.seed && !g.config.empty()) reseed(cfg, *g.seed);
  return cfg;
}

mcflow::ObjectiveKind parse_objective(const std::string& s) {
  if (s == "variance") return mcflow::ObjectiveKind::kVariance;
  if (s == "gradient") return mcflow::ObjectiveKind::kGradientMagnitude;
  if (s == "mf-variance") return mcflow::ObjectiveKind::kMultifocalVariance;
  if (s == "mf-gradient") return mcflow::ObjectiveKind::kMultifocalGradient;
  throw ContractError("unknown objective '" + s + "'");
}

// "1x1,2x2,4x4" -> grid schedule.
std::vector<mcflow::GridSize> parse_schedule(const std::string& s) {
  std::vector<mcflow::GridSize> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = std::min(s.find(',', pos), s.size());
    const std::string item = s.substr(pos, comma - pos);
    mcflow::GridSize g;
    if (std::sscanf(item.c_str(), "%dx%d", &g.cols, &g.rows) != 2) {
      throw ContractError("bad grid '" + item + "', expected COLSxROWS");
    }
    out.push_back(g);
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic event-camera datasets, contrast-maximization flow and evaluation"};
  app.set_version_flag("--version", EVKIT_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--config", g.config, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--threads", g.threads, "Worker threads (default: EVKIT_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output path");

  // generate
  auto* gen = app.add_subcommand("generate", "Synthesize a scene and record a dataset container");
  std::optional<double> gen_duration;
  std::optional<std::string> gen_preset;
  bool gen_static = false;
  std::optional<double> gen_noise;
  std::string gen_dump;
  gen->add_option("--duration", gen_duration, "Sequence length, seconds");
  gen->add_option("--preset", gen_preset, "Camera preset")->check(CLI::IsMember({"down", "forward"}));
  gen->add_flag("--static", gen_static, "No fish");
  gen->add_option("--noise-rate", gen_noise, "Background noise, Hz per pixel");
  gen->add_option("--dump-config", gen_dump, "Write the effective config and exit");

  // simulate-events
  auto* sim = app.add_subcommand("simulate-events", "Events from a frame directory or container");
  SimulateOptions sim_opt;
  sim->add_option("input", sim_opt.input, "PGM directory or .evz")->required()->check(CLI::ExistingPath);
  sim->add_option("--fps", sim_opt.fps, "Frame rate of a PGM directory");

  // encode
  auto* enc = app.add_subcommand("encode", "Encode events into PGM planes");
  EncodeOptions enc_opt;
  std::string enc_scheme = "count";
  bool enc_signed = false;
  enc->add_option("input", enc_opt.input, "Events (.evz or text)")->required()->check(CLI::ExistingFile);
  enc->add_option("--scheme", enc_scheme)->check(CLI::IsMember({"count", "gaussian"}));
  enc->add_option("--bins", enc_opt.encoder.bins)->check(CLI::PositiveNumber);
  enc->add_option("--lambda", enc_opt.encoder.lambda, "Gaussian width per bin width");
  enc->add_flag("--signed", enc_signed, "Single polarity-signed channel");
  enc->add_option("--start", enc_opt.span.begin, "Span start, us");
  enc->add_option("--end", enc_opt.span.end, "Span end, us");

  // estimate
  auto* est = app.add_subcommand("estimate", "Contrast-maximization flow per frame interval");
  EstimateOptions est_opt;
  std::string est_objective = "variance";
  std::string est_schedule;
  bool est_no_blur = false;
  est->add_option("input", est_opt.input, "Container")->required()->check(CLI::ExistingFile);
  est->add_option("--objective", est_objective)
      ->check(CLI::IsMember({"variance", "gradient", "mf-variance", "mf-gradient"}));
  est->add_option("--schedule", est_schedule, "Grid schedule, e.g. 1x1,2x2,4x4");
  est->add_option("--lambda", est_opt.estimator.lambda_s, "Smoothness weight");
  est->add_option("--starts", est_opt.estimator.starts);
  est->add_option("--scan-radius", est_opt.estimator.scan_radius, "Lattice scan half-width, px");
  est->add_option("--max-iters", est_opt.estimator.max_iters);
  est->add_flag("--no-blur", est_no_blur);
  est->add_option("--span", est_opt.span, "Frame intervals per fitting window")->check(CLI::PositiveNumber);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compare predicted and ground-truth flow");
  EvaluateOptions ev_opt;
  ev->add_option("pred", ev_opt.pred)->required()->check(CLI::ExistingFile);
  ev->add_option("gt", ev_opt.gt)->required()->check(CLI::ExistingFile);
  ev->add_option("--budget", ev_opt.budget, "Fail when the aggregate AEE exceeds this");

  // visualize
  auto* vis = app.add_subcommand("visualize", "Overlay, flow-color or point-cloud outputs");
  VisualizeOptions vis_opt;
  std::string vis_mode = "overlay";
  double vis_window_ms = 100.0;
  vis->add_option("input", vis_opt.input)->required()->check(CLI::ExistingFile);
  vis->add_option("--mode", vis_mode)->check(CLI::IsMember({"overlay", "flow-color", "volume"}));
  vis->add_option("--window-ms", vis_window_ms, "Overlay accumulation window");

  // import / export
  auto* imp = app.add_subcommand("import", "Text events into a container");
  ImportOptions imp_opt;
  int imp_w = 128, imp_h = 128;
  imp->add_option("input", imp_opt.input)->required()->check(CLI::ExistingFile);
  imp->add_option("--width", imp_w)->check(CLI::PositiveNumber);
  imp->add_option("--height", imp_h)->check(CLI::PositiveNumber);

  auto* exp = app.add_subcommand("export", "Container events as text");
  std::string exp_input;
  exp->add_option("input", exp_input)->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  auto need_out = [&](const char* what) {
    if (g.out.empty()) throw ContractError(fmt::format("--out is required for {}", what));
    return std::filesystem::path(g.out);
  };

  try {
    if (*gen) {
      PipelineConfig cfg = pipeline_config(g);
      if (gen_duration) cfg.trajectory.duration_s = *gen_duration;
      if (gen_preset) cfg.trajectory.preset = *gen_preset;
      if (gen_static) cfg.static_scene = true;
      if (gen_noise) cfg.noise_rate = *gen_noise;
      cfg.validate();
      if (!gen_dump.empty()) {
        std::ofstream out(gen_dump);
        out << to_json(cfg).dump(2) << '\n';
        return out ? 0 : 1;
      }
      const auto s = run_generate(cfg, need_out("generate"), g.threads);
      fmt::print("{}: {} frames, {} samples, {} events, {} fish\n", s.container.string(), s.frames,
                 s.samples, s.events, s.fish);
    } else if (*sim) {
      sim_opt.output = need_out("simulate-events");
      sim_opt.threads = g.threads;
      if (!g.config.empty()) sim_opt.sensor = load_pipeline_config(g.config).sensor;
      fmt::print("{} events\n", cmd_simulate_events(sim_opt));
    } else if (*enc) {
      enc_opt.out_dir = need_out("encode");
      enc_opt.encoder.scheme = enc_scheme == "gaussian" ? encode::Scheme::kGaussian : encode::Scheme::kCount;
      if (enc_signed) enc_opt.encoder.channel_mode = encode::ChannelMode::kSigned;
      if (!g.config.empty()) enc_opt.sensor = load_pipeline_config(g.config).sensor;
      fmt::print("{} planes\n", cmd_encode(enc_opt));
    } else if (*est) {
      est_opt.output = need_out("estimate");
      auto& e = est_opt.estimator;
      e.objective.kind = parse_objective(est_objective);
      if (est_no_blur) e.objective.blur = false;
      if (!est_schedule.empty()) e.schedule = parse_schedule(est_schedule);
      e.threads = g.threads;
      PipelineConfig cfg = pipeline_config(g);
      e.seed = cfg.seeds.optimizer;
      e.validate();
      fmt::print("{} flow fields\n", cmd_estimate(est_opt));
    } else if (*ev) {
      if (!g.out.empty()) ev_opt.report = g.out;
      cmd_evaluate(ev_opt);
    } else if (*vis) {
      vis_opt.out_dir = need_out("visualize");
      vis_opt.mode = parse_visual_mode(vis_mode);
      vis_opt.window_us = std::llround(vis_window_ms * 1000.0);
      fmt::print("{} written\n", cmd_visualize(vis_opt));
    } else if (*imp) {
      imp_opt.output = need_out("import");
      imp_opt.sensor = g.config.empty() ? SensorConfig::desk(imp_w, imp_h)
                                        : load_pipeline_config(g.config).sensor;
      fmt::print("{} events\n", cmd_import(imp_opt));
    } else if (*exp) {
      fmt::print("{} events\n", cmd_export(exp_input, need_out("export")));
    }
  } catch (const BudgetExceeded& e) {
    std::cerr << "evkit: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "evkit: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
