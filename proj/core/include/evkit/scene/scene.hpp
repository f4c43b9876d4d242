#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace evkit::scene {

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

/// Triangle mesh in ENU metres with unit per-vertex normals.
struct TerrainMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;
  std::vector<Vec3> normals;

  /// Throws ContractError for bad face indices or non-unit normals.
  void validate() const;
};

/// Area-weighted average of incident face normals.
void compute_normals(TerrainMesh& mesh);

/// Minimal OBJ subset: `v x y z`, optional `vn x y z` (one per vertex), and
/// `f i j k` with 1-based indices (`i/..//k` forms accepted, extra fields
/// ignored). Normals are computed when absent.
TerrainMesh parse_mesh(std::istream& in);
TerrainMesh read_mesh(const std::filesystem::path& path);
void write_mesh(const std::filesystem::path& path, const TerrainMesh& mesh);

/// Seeded rolling seabed: nx x ny vertex grid with `spacing` metres between
/// vertices, heights a sum of smooth random bumps.
TerrainMesh make_seabed(int nx, int ny, double spacing, std::uint64_t seed,
                        double amplitude = 0.4);

/// (E, N, U) -> (N, E, -U). Its own inverse.
inline Vec3 enu_to_ned(const Vec3& p) { return {p.y(), p.x(), -p.z()}; }

struct ModelEntry {
  std::string id;
  std::string mesh;
  std::string texture;
  /// Bounding radius at scale 1, metres.
  double radius = 0.5;
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int clusters = 3;
  int per_cluster = 20;
  double cluster_radius = 4.0;
  double scale_min = 0.3;
  double scale_max = 1.5;
  std::vector<ModelEntry> catalogue;

  /// Three clusters of twenty corals drawn from a small default catalogue.
  static SceneSpec defaults(std::uint64_t seed = 0);
  void validate() const;
};

/// Model local up-axis in the NED body frame.
inline const Vec3 kModelUp{0.0, 0.0, -1.0};

struct Placement {
  std::string model_id;
  std::uint64_t vertex = 0;
  Vec3 position = Vec3::Zero();  // NED
  Quat rotation = Quat::Identity();
  double scale = 1.0;
};

/// clusters * per_cluster placements. Cluster centres are uniform over mesh
/// vertices; members are drawn without replacement from vertices within
/// cluster_radius of the centre. Each rotation maps kModelUp onto the vertex
/// normal (NED) and then yaws uniformly about it. Throws ContractError when a
/// cluster has fewer candidate vertices than per_cluster.
std::vector<Placement> sample_placements(const TerrainMesh& mesh, const SceneSpec& spec);

struct SceneFile {
  SceneSpec spec;
  std::vector<Placement> placements;
};

std::string format_scene(const SceneFile& scene);
SceneFile parse_scene(std::istream& in);
void write_scene(const std::filesystem::path& path, const SceneFile& scene);
SceneFile read_scene(const std::filesystem::path& path);

/// Bounding radius of a placement (catalogue radius times scale).
double placement_radius(const SceneSpec& spec, const Placement& p);

}  // namespace evkit::scene
