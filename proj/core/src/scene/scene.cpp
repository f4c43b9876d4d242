#include "evkit/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "evkit/error.hpp"
#include "evkit/util/rng.hpp"

namespace evkit::scene {

void TerrainMesh::validate() const {
  for (const auto& f : faces) {
    for (std::uint32_t i : f) {
      if (i >= vertices.size()) throw ContractError("mesh face index out of range");
    }
  }
  if (normals.size() != vertices.size()) throw ContractError("mesh needs one normal per vertex");
  for (const Vec3& n : normals) {
    if (std::abs(n.norm() - 1.0) > 1e-6) throw ContractError("mesh normal is not unit length");
  }
}

void compute_normals(TerrainMesh& mesh) {
  std::vector<Vec3> acc(mesh.vertices.size(), Vec3::Zero());
  for (const auto& f : mesh.faces) {
    const Vec3& a = mesh.vertices.at(f[0]);
    const Vec3& b = mesh.vertices.at(f[1]);
    const Vec3& c = mesh.vertices.at(f[2]);
    // |cross| is twice the face area, which is the weighting we want.
    const Vec3 n = (b - a).cross(c - a);
    for (std::uint32_t i : f) acc[i] += n;
  }
  mesh.normals.resize(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double len = acc[i].norm();
    mesh.normals[i] = len > 0.0 ? Vec3(acc[i] / len) : Vec3(0.0, 0.0, 1.0);
  }
}

TerrainMesh parse_mesh(std::istream& in) {
  TerrainMesh mesh;
  std::vector<Vec3> normals;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v" || tag == "vn") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw FormatError(fmt::format("mesh line {}: bad vector", line_no));
      (tag == "v" ? mesh.vertices : normals).emplace_back(x, y, z);
    } else if (tag == "f") {
      std::array<std::uint32_t, 3> face{};
      for (auto& idx : face) {
        std::string tok;
        if (!(ls >> tok)) throw FormatError(fmt::format("mesh line {}: face needs 3 indices", line_no));
        const long v = std::stol(tok.substr(0, tok.find('/')));
        if (v < 1) throw FormatError(fmt::format("mesh line {}: bad face index", line_no));
        idx = static_cast<std::uint32_t>(v - 1);
      }
      mesh.faces.push_back(face);
    }
  }
  if (!normals.empty() && normals.size() == mesh.vertices.size()) {
    for (Vec3& n : normals) n.normalize();
    mesh.normals = std::move(normals);
  } else {
    compute_normals(mesh);
  }
  mesh.validate();
  return mesh;
}

TerrainMesh read_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_mesh(in);
}

void write_mesh(const std::filesystem::path& path, const TerrainMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const Vec3& v : mesh.vertices) out << fmt::format("v {:.17g} {:.17g} {:.17g}\n", v.x(), v.y(), v.z());
  for (const Vec3& n : mesh.normals) out << fmt::format("vn {:.17g} {:.17g} {:.17g}\n", n.x(), n.y(), n.z());
  for (const auto& f : mesh.faces) out << fmt::format("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1);
  if (!out) throw IoError("write failed: " + path.string());
}

TerrainMesh make_seabed(int nx, int ny, double spacing, std::uint64_t seed, double amplitude) {
  if (nx < 2 || ny < 2 || !(spacing > 0.0)) throw ContractError("seabed grid too small");
  Rng rng(seed);
  struct Bump {
    double e, n, r, a;
  };
  std::vector<Bump> bumps(12);
  const double ext_e = (nx - 1) * spacing;
  const double ext_n = (ny - 1) * spacing;
  for (Bump& b : bumps) {
    b.e = rng.uniform(0.0, ext_e);
    b.n = rng.uniform(0.0, ext_n);
    b.r = rng.uniform(0.1, 0.3) * std::max(ext_e, ext_n);
    b.a = rng.uniform(-1.0, 1.0) * amplitude;
  }
  TerrainMesh mesh;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double e = i * spacing;
      const double n = j * spacing;
      double u = 0.0;
      for (const Bump& b : bumps) {
        const double d2 = (e - b.e) * (e - b.e) + (n - b.n) * (n - b.n);
        u += b.a * std::exp(-d2 / (2.0 * b.r * b.r));
      }
      mesh.vertices.emplace_back(e, n, u);
    }
  }
  auto id = [nx](int i, int j) { return static_cast<std::uint32_t>(j * nx + i); };
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) {
      // Counter-clockwise seen from +U so face normals point up.
      mesh.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  compute_normals(mesh);
  return mesh;
}

SceneSpec SceneSpec::defaults(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.catalogue = {
      {"antler_coral", "models/antler_coral.obj", "textures/antler_coral.png", 0.35},
      {"brain_coral", "models/brain_coral.obj", "textures/brain_coral.png", 0.5},
      {"dome_coral", "models/dome_coral.obj", "textures/dome_coral.png", 0.8},
  };
  return s;
}

void SceneSpec::validate() const {
  if (clusters < 1 || per_cluster < 1) throw ContractError("scene needs >= 1 cluster and coral");
  if (!(cluster_radius > 0.0)) throw ContractError("cluster radius must be positive");
  if (!(scale_min > 0.0) || scale_max < scale_min) throw ContractError("bad scale range");
  if (catalogue.empty()) throw ContractError("scene catalogue is empty");
}

std::vector<Placement> sample_placements(const TerrainMesh& mesh, const SceneSpec& spec) {
  spec.validate();
  if (mesh.vertices.empty()) throw ContractError("terrain mesh has no vertices");
  mesh.validate();
  Rng rng(spec.seed);
  const double r2 = spec.cluster_radius * spec.cluster_radius;
  std::vector<Placement> out;
  out.reserve(static_cast<std::size_t>(spec.clusters) * spec.per_cluster);
  for (int c = 0; c < spec.clusters; ++c) {
    const std::size_t centre = rng.below(mesh.vertices.size());
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
      if ((mesh.vertices[i] - mesh.vertices[centre]).squaredNorm() <= r2) candidates.push_back(i);
    }
    if (candidates.size() < static_cast<std::size_t>(spec.per_cluster)) {
      throw ContractError(fmt::format("cluster {} has {} vertices within {} m, needs {}", c,
                                      candidates.size(), spec.cluster_radius, spec.per_cluster));
    }
    // Partial Fisher-Yates: the first per_cluster entries become the sample.
    for (int k = 0; k < spec.per_cluster; ++k) {
      const std::size_t j = k + rng.below(candidates.size() - static_cast<std::size_t>(k));
      std::swap(candidates[static_cast<std::size_t>(k)], candidates[j]);
      const std::size_t v = candidates[static_cast<std::size_t>(k)];

      Placement p;
      p.model_id = spec.catalogue[rng.below(spec.catalogue.size())].id;
      p.vertex = v;
      p.position = enu_to_ned(mesh.vertices[v]);
      const Vec3 normal = enu_to_ned(mesh.normals[v]).normalized();
      const double yaw = rng.uniform(0.0, 2.0 * std::numbers::pi);
      p.rotation = (Eigen::AngleAxisd(yaw, normal) * Quat::FromTwoVectors(kModelUp, normal))
                       .normalized();
      p.scale = rng.uniform(spec.scale_min, spec.scale_max);
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::string format_scene(const SceneFile& scene) {
  const SceneSpec& s = scene.spec;
  std::string out;
  auto put = [&out](const std::string& line) { out += line; };
  put("# evkit scene\n");
  put("version 1\n");
  put(fmt::format("seed {}\n", s.seed));
  put(fmt::format("clusters {}\n", s.clusters));
  put(fmt::format("per_cluster {}\n", s.per_cluster));
  put(fmt::format("cluster_radius {:.17g}\n", s.cluster_radius));
  put(fmt::format("scale_range {:.17g} {:.17g}\n", s.scale_min, s.scale_max));
  for (const ModelEntry& m : s.catalogue) {
    put(fmt::format("model {} {} {} {:.17g}\n", m.id, m.mesh, m.texture, m.radius));
  }
  put(fmt::format("objects {}\n", scene.placements.size()));
  // object <model> <vertex> <n> <e> <d> <qw> <qx> <qy> <qz> <scale>
  for (const Placement& p : scene.placements) {
    put(fmt::format("object {} {} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g}\n",
                    p.model_id, p.vertex, p.position.x(), p.position.y(), p.position.z(),
                    p.rotation.w(), p.rotation.x(), p.rotation.y(), p.rotation.z(), p.scale));
  }
  return out;
}

SceneFile parse_scene(std::istream& in) {
  SceneFile scene;
  SceneSpec& s = scene.spec;
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected = 0;
  auto fail = [&line_no](const std::string& what) {
    return FormatError(fmt::format("scene line {}: {}", line_no, what));
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    bool ok = true;
    if (key == "version") {
      int v = 0;
      ok = static_cast<bool>(ls >> v);
      if (ok && v != 1) throw fail("unsupported version");
    } else if (key == "seed") {
      ok = static_cast<bool>(ls >> s.seed);
    } else if (key == "clusters") {
      ok = static_cast<bool>(ls >> s.clusters);
    } else if (key == "per_cluster") {
      ok = static_cast<bool>(ls >> s.per_cluster);
    } else if (key == "cluster_radius") {
      ok = static_cast<bool>(ls >> s.cluster_radius);
    } else if (key == "scale_range") {
      ok = static_cast<bool>(ls >> s.scale_min >> s.scale_max);
    } else if (key == "model") {
      ModelEntry m;
      ok = static_cast<bool>(ls >> m.id >> m.mesh >> m.texture >> m.radius);
      s.catalogue.push_back(m);
    } else if (key == "objects") {
      ok = static_cast<bool>(ls >> expected);
    } else if (key == "object") {
      Placement p;
      double n, e, d, qw, qx, qy, qz;
      ok = static_cast<bool>(ls >> p.model_id >> p.vertex >> n >> e >> d >> qw >> qx >> qy >> qz >>
                             p.scale);
      p.position = Vec3(n, e, d);
      p.rotation = Quat(qw, qx, qy, qz);
      scene.placements.push_back(std::move(p));
    } else {
      throw fail("unknown key '" + key + "'");
    }
    if (!ok) throw fail("malformed '" + key + "' record");
  }
  if (scene.placements.size() != expected) {
    throw FormatError(fmt::format("scene declares {} objects but lists {}", expected,
                                  scene.placements.size()));
  }
  return scene;
}

void write_scene(const std::filesystem::path& path, const SceneFile& scene) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_scene(scene);
  if (!out) throw IoError("write failed: " + path.string());
}

SceneFile read_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_scene(in);
}

double placement_radius(const SceneSpec& spec, const Placement& p) {
  for (const ModelEntry& m : spec.catalogue) {
    if (m.id == p.model_id) return m.radius * p.scale;
  }
  return 0.0;
}

}  // namespace evkit::scene
