#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "evkit/event.hpp"

namespace evkit::store {

/// Sidecar next to a container: `data.evz` -> `data.props.json`.
std::filesystem::path sidecar_path(const std::filesystem::path& container);

void write_sidecar(const std::filesystem::path& path, const nlohmann::json& props);
nlohmann::json read_sidecar(const std::filesystem::path& path);

nlohmann::json sensor_to_json(const SensorConfig& sensor);
/// Missing keys keep the defaults of `base`.
SensorConfig sensor_from_json(const nlohmann::json& j, SensorConfig base = {});

}  // namespace evkit::store
