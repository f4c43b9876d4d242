#include "evkit/store/text_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <string>
#include <string_view>

#include <fmt/format.h>

namespace evkit::store {

namespace {

template <typename T>
bool parse_field(std::string_view& rest, T& out) {
  const auto start = rest.find_first_not_of(" \t\r");
  if (start == std::string_view::npos) return false;
  rest.remove_prefix(start);
  const auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), out);
  if (ec != std::errc{}) return false;
  rest.remove_prefix(static_cast<std::size_t>(ptr - rest.data()));
  return rest.empty() || rest.front() == ' ' || rest.front() == '\t' || rest.front() == '\r';
}

}  // namespace

EventStream import_text(std::istream& in, const SensorConfig& sensor) {
  sensor.validate();
  std::vector<Event> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    const auto first = rest.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || rest[first] == '#') continue;
    long long t = 0;
    long x = 0;
    long y = 0;
    int p = 0;
    if (!parse_field(rest, t) || !parse_field(rest, x) || !parse_field(rest, y) ||
        !parse_field(rest, p) || rest.find_first_not_of(" \t\r") != std::string_view::npos) {
      throw FormatError(fmt::format("line {}: expected 't_us x y p'", line_no));
    }
    if (t < 0) throw FormatError(fmt::format("line {}: negative timestamp", line_no));
    if (p != 0 && p != 1) throw FormatError(fmt::format("line {}: polarity must be 0 or 1", line_no));
    if (x < 0 || y < 0 || x >= sensor.width || y >= sensor.height) {
      throw FormatError(fmt::format("line {}: coordinate ({}, {}) outside {}x{} sensor", line_no,
                                    x, y, sensor.width, sensor.height));
    }
    events.push_back(Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y),
                           static_cast<TimeUs>(t), static_cast<std::int8_t>(p ? 1 : -1)});
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.t < b.t; });
  return EventStream(sensor, std::move(events));
}

EventStream import_text(const std::filesystem::path& path, const SensorConfig& sensor) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return import_text(in, sensor);
}

void export_text(std::ostream& out, const EventStream& stream) {
  fmt::memory_buffer buf;
  for (const Event& e : stream) {
    fmt::format_to(std::back_inserter(buf), "{} {} {} {}\n", e.t, e.x, e.y, e.positive() ? 1 : 0);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

void export_text(const std::filesystem::path& path, const EventStream& stream) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  export_text(out, stream);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace evkit::store
