#pragma once

#include <filesystem>
#include <iosfwd>

#include "evkit/event.hpp"

namespace evkit::store {

// Plain-text interchange: one event per line, "t_us x y p" with p in {0, 1}.
// Blank lines and lines starting with '#' are ignored.

/// Parses and time-sorts (stably) the events; throws FormatError carrying the
/// line number for malformed lines or coordinates outside the sensor.
EventStream import_text(std::istream& in, const SensorConfig& sensor);
EventStream import_text(const std::filesystem::path& path, const SensorConfig& sensor);

void export_text(std::ostream& out, const EventStream& stream);
void export_text(const std::filesystem::path& path, const EventStream& stream);

}  // namespace evkit::store
