#include "evkit/store/metadata.hpp"

#include <fstream>

namespace evkit::store {

std::filesystem::path sidecar_path(const std::filesystem::path& container) {
  std::filesystem::path p = container;
  p.replace_extension(".props.json");
  return p;
}

void write_sidecar(const std::filesystem::path& path, const nlohmann::json& props) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << props.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

nlohmann::json read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

nlohmann::json sensor_to_json(const SensorConfig& s) {
  return {{"width", s.width},
          {"height", s.height},
          {"fov_deg", s.fov_deg},
          {"c_pos", s.c_pos},
          {"c_neg", s.c_neg},
          {"refractory_ns", s.refractory_ns},
          {"frame_rate", s.frame_rate},
          {"compare_rate", s.compare_rate}};
}

SensorConfig sensor_from_json(const nlohmann::json& j, SensorConfig s) {
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.fov_deg = j.value("fov_deg", s.fov_deg);
  s.c_pos = j.value("c_pos", s.c_pos);
  s.c_neg = j.value("c_neg", s.c_neg);
  s.refractory_ns = j.value("refractory_ns", s.refractory_ns);
  s.frame_rate = j.value("frame_rate", s.frame_rate);
  s.compare_rate = j.value("compare_rate", s.compare_rate);
  s.validate();
  return s;
}

}  // namespace evkit::store
