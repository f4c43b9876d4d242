#include "evkit/boids/school.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "evkit/error.hpp"
#include "evkit/util/parallel.hpp"
#include "evkit/util/rng.hpp"

namespace evkit::boids {

namespace {

Vec3 unit_or_zero(const Vec3& v) {
  const double n = v.norm();
  return n > 0.0 ? Vec3(v / n) : Vec3::Zero();
}

Vec3 random_unit(std::uint64_t seed) {
  Rng rng(seed);
  while (true) {
    const Vec3 v(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

template <typename Fn>
void for_neighbors(std::size_t i, std::span<const BoidState> school, double radius, Fn&& fn) {
  const Vec3& p = school[i].position;
  for (std::size_t j = 0; j < school.size(); ++j) {
    if (j == i) continue;
    if ((school[j].position - p).norm() <= radius) fn(j);
  }
}

}  // namespace

void SchoolConfig::validate() const {
  if (size < 1) throw ContractError("school size must be at least 1");
  for (double w : {w_align, w_cohere, w_separate, w_leader, cohesion_gain, leader_gain}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("school weights must be >= 0");
  }
  if (!(r_perception > 0.0) || !(r_separation > 0.0)) {
    throw ContractError("school radii must be positive");
  }
  if (!(v_max > 0.0)) throw ContractError("v_max must be positive");
  if (!(dt > 0.0)) throw ContractError("dt must be positive");
  if (!(spawn_radius >= 0.0) || !spawn_center.allFinite()) {
    throw ContractError("invalid spawn region");
  }
  if (!(model_scale > 0.0)) throw ContractError("model scale must be positive");
}

nlohmann::json to_json(const SchoolConfig& c) {
  return {{"size", c.size},
          {"w_align", c.w_align},
          {"w_cohere", c.w_cohere},
          {"w_separate", c.w_separate},
          {"w_leader", c.w_leader},
          {"r_perception", c.r_perception},
          {"r_separation", c.r_separation},
          {"v_max", c.v_max},
          {"dt", c.dt},
          {"cohesion_gain", c.cohesion_gain},
          {"leader_gain", c.leader_gain},
          {"spawn_center", {c.spawn_center.x(), c.spawn_center.y(), c.spawn_center.z()}},
          {"spawn_radius", c.spawn_radius},
          {"model_scale", c.model_scale},
          {"model", c.model},
          {"seed", c.seed}};
}

SchoolConfig school_from_json(const nlohmann::json& j) {
  SchoolConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("size", c.size);
  get("w_align", c.w_align);
  get("w_cohere", c.w_cohere);
  get("w_separate", c.w_separate);
  get("w_leader", c.w_leader);
  get("r_perception", c.r_perception);
  get("r_separation", c.r_separation);
  get("v_max", c.v_max);
  get("dt", c.dt);
  get("cohesion_gain", c.cohesion_gain);
  get("leader_gain", c.leader_gain);
  if (j.contains("spawn_center")) {
    const auto& a = j.at("spawn_center");
    if (!a.is_array() || a.size() != 3) throw ContractError("spawn_center needs 3 numbers");
    c.spawn_center = Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
  }
  get("spawn_radius", c.spawn_radius);
  get("model_scale", c.model_scale);
  get("model", c.model);
  get("seed", c.seed);
  c.validate();
  return c;
}

Vec3 force_alignment(std::size_t i, std::span<const BoidState> school, const SchoolConfig& cfg) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for_neighbors(i, school, cfg.r_perception, [&](std::size_t j) {
    sum += school[j].velocity;
    ++n;
  });
  if (n == 0) return Vec3::Zero();
  return cfg.w_align * (sum / static_cast<double>(n) - school[i].velocity);
}

Vec3 force_cohesion(std::size_t i, std::span<const BoidState> school, const SchoolConfig& cfg) {
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for_neighbors(i, school, cfg.r_perception, [&](std::size_t j) {
    sum += school[j].position;
    ++n;
  });
  if (n == 0) return Vec3::Zero();
  const Vec3 dir = unit_or_zero(sum / static_cast<double>(n) - school[i].position);
  return cfg.w_cohere * cfg.cohesion_gain * dir;
}

Vec3 force_separation(std::size_t i, std::span<const BoidState> school, const SchoolConfig& cfg,
                      std::uint64_t step) {
  Vec3 f = Vec3::Zero();
  const Vec3& p = school[i].position;
  for (std::size_t j = 0; j < school.size(); ++j) {
    if (j == i) continue;
    const Vec3 d = p - school[j].position;
    const double d2 = d.squaredNorm();
    if (d2 >= cfg.r_separation * cfg.r_separation) continue;
    if (d2 == 0.0) {
      // Coincident pair: seeded direction, opposite for the two members.
      const std::uint64_t lo = std::min(i, j);
      const std::uint64_t hi = std::max(i, j);
      const Vec3 dir = random_unit(mix_seed(mix_seed(cfg.seed, step), (lo << 32) ^ hi));
      const double mag = cfg.w_separate / (cfg.r_separation * cfg.r_separation);
      f += (i == lo ? 1.0 : -1.0) * mag * dir;
      continue;
    }
    f += cfg.w_separate * d / (d2 * std::sqrt(d2));
  }
  return f;
}

Vec3 force_leader(std::size_t i, std::span<const BoidState> school, const SchoolConfig& cfg,
                  std::size_t leader) {
  if (i == leader) return Vec3::Zero();
  const Vec3 dir = unit_or_zero(school[leader].position - school[i].position);
  return cfg.w_leader * cfg.leader_gain * dir;
}

Vec3 environment_force(const BoidState& boid, const Environment& env) {
  Vec3 f = Vec3::Zero();
  if (env.voxels != nullptr) {
    if (auto r = env.voxels->repulsion_at(boid.position)) f += env.voxel_strength * *r;
  }
  for (const DynamicRepeller& rep : env.repellers) {
    const Vec3 d = boid.position - rep.position;
    const double dist = d.norm();
    if (dist >= rep.r_repel) continue;
    const Vec3 dir = dist > 0.0 ? Vec3(d / dist) : Vec3(0.0, 0.0, -1.0);
    f += rep.strength * (1.0 - dist / rep.r_repel) * dir;
  }
  if (env.surface) {
    const PlanarRepeller& s = *env.surface;
    const double gap = boid.position.z() - s.depth;
    if (gap < s.margin) {
      const double pen = std::min(1.0, (s.margin - gap) / s.margin);
      f += Vec3(0.0, 0.0, s.strength * pen);
    }
  }
  return f;
}

Vec3 clamp_speed(const Vec3& v, double v_max) {
  const double n = v.norm();
  if (n <= v_max) return v;
  Vec3 out = v * (v_max / n);
  while (out.norm() > v_max) out *= std::nextafter(1.0, 0.0);
  return out;
}

School::School(SchoolConfig cfg, LeaderPath path) : cfg_(std::move(cfg)), path_(std::move(path)) {
  cfg_.validate();
  boids_.resize(static_cast<std::size_t>(cfg_.size));
  Rng rng(mix_seed(cfg_.seed, 0x5c4001));
  for (std::size_t i = 0; i < boids_.size(); ++i) {
    if (i == leader() && !path_.waypoints.empty()) {
      boids_[i].position = path_.waypoints.front();
      continue;
    }
    Vec3 off;
    do {
      off = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    } while (off.squaredNorm() > 1.0);
    boids_[i].position = cfg_.spawn_center + cfg_.spawn_radius * off;
  }
  if (!path_.waypoints.empty() && path_.target >= path_.waypoints.size()) {
    throw ContractError("leader target index out of range");
  }
}

Vec3 School::total_force(std::size_t i, const Environment& env) const {
  Vec3 f = environment_force(boids_[i], env);
  if (i == leader()) {
    if (!path_.waypoints.empty()) {
      const Vec3 dir = unit_or_zero(path_.waypoints[path_.target] - boids_[i].position);
      f += cfg_.w_leader * cfg_.leader_gain * dir;
    }
    return f;
  }
  f += force_alignment(i, boids_, cfg_);
  f += force_cohesion(i, boids_, cfg_);
  f += force_separation(i, boids_, cfg_, steps_);
  f += force_leader(i, boids_, cfg_, leader());
  return f;
}

void School::step(const Environment& env, int threads, bool clamp) {
  std::vector<BoidState> next(boids_.size());
  parallel_for(boids_.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Vec3 f = total_force(i, env);
      Vec3 v = boids_[i].velocity + f * cfg_.dt;
      if (clamp) v = clamp_speed(v, cfg_.v_max);
      next[i].velocity = v;
      next[i].position = boids_[i].position + v * cfg_.dt;
    }
  });
  boids_ = std::move(next);
  ++steps_;
  if (!path_.waypoints.empty()) {
    const Vec3& p = boids_[leader()].position;
    while (path_.target + 1 < path_.waypoints.size() &&
           (path_.waypoints[path_.target] - p).norm() <= path_.reach_radius) {
      ++path_.target;
    }
  }
}

std::vector<TrajectoryRecord> run_school(
    School& school, int school_id, Environment env, int steps, int threads,
    const std::function<void(double, Environment&)>& update) {
  std::vector<TrajectoryRecord> out;
  out.reserve(school.boids().size() * static_cast<std::size_t>(steps + 1));
  auto record = [&](double t) {
    for (std::size_t i = 0; i < school.boids().size(); ++i) {
      out.push_back({t, school_id, static_cast<int>(i), school.boids()[i]});
    }
  };
  const double dt = school.config().dt;
  record(0.0);
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (update) update(t, env);
    school.step(env, threads);
    record(static_cast<double>(k + 1) * dt);
  }
  return out;
}

void write_trajectory(const std::filesystem::path& path, std::span<const TrajectoryRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "# t school boid n e d vn ve vd\n";
  for (const TrajectoryRecord& r : records) {
    const Vec3& p = r.state.position;
    const Vec3& v = r.state.velocity;
    out << fmt::format("{:.17g} {} {} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g}\n", r.t,
                       r.school, r.boid, p.x(), p.y(), p.z(), v.x(), v.y(), v.z());
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<TrajectoryRecord> read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TrajectoryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TrajectoryRecord r;
    Vec3& p = r.state.position;
    Vec3& v = r.state.velocity;
    if (!(ss >> r.t >> r.school >> r.boid >> p.x() >> p.y() >> p.z() >> v.x() >> v.y() >> v.z())) {
      throw FormatError(fmt::format("{}:{}: malformed trajectory record", path.string(), lineno));
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace evkit::boids
