#include "evkit/store/container.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <system_error>

#include <fmt/format.h>

#include "bytes.hpp"
#include "evkit/store/flow_accumulate.hpp"

namespace evkit::store {

using detail::Cursor;
using detail::put_le;

namespace {

constexpr std::array<char, 4> kMagic{'E', 'V', 'Z', '1'};
constexpr std::size_t kHeaderBytes = 112;
constexpr std::size_t kBlockRecordBytes = 48;
constexpr std::size_t kChannelRecordBytes = 32;

constexpr std::uint32_t elem_size_of(Channel ch) {
  switch (ch) {
    case Channel::kX:
    case Channel::kY:
      return 2;
    case Channel::kP:
      return 1;
    default:
      return 8;
  }
}

constexpr bool is_delta(Channel ch) {
  return ch == Channel::kT || ch == Channel::kEventToGray || ch == Channel::kEventToFlow;
}

struct BlockRecord {
  std::uint64_t offset = 0;
  std::uint64_t stored_bytes = 0;
  std::uint64_t first_entry = 0;
  std::uint64_t entries = 0;
  std::int64_t min_key = 0;
  std::int64_t max_key = 0;
};

struct ChannelRecord {
  Channel id{};
  std::uint32_t elem_size = 0;
  bool delta = false;
  std::uint64_t entries = 0;
  std::vector<BlockRecord> blocks;
};

// ---------------------------------------------------------------- writing

struct PendingChannel {
  ChannelRecord record;
  std::vector<std::vector<std::uint8_t>> payloads;
};

template <typename T>
std::vector<std::uint8_t> serialize_block(std::span<const T> values, bool delta) {
  std::vector<std::uint8_t> raw;
  raw.reserve(values.size() * sizeof(T));
  T prev{};
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (delta && i > 0) {
      put_le<T>(raw, static_cast<T>(values[i] - prev));
    } else {
      put_le<T>(raw, values[i]);
    }
    prev = values[i];
  }
  return raw;
}

template <typename T>
PendingChannel pack_event_channel(Channel id, std::span<const T> column,
                                  std::uint32_t block_entries, const Codec& codec) {
  PendingChannel ch;
  ch.record.id = id;
  ch.record.elem_size = elem_size_of(id);
  ch.record.delta = is_delta(id);
  ch.record.entries = column.size();
  for (std::size_t first = 0; first < column.size(); first += block_entries) {
    const std::size_t n = std::min<std::size_t>(block_entries, column.size() - first);
    auto values = column.subspan(first, n);
    const auto raw = serialize_block<T>(values, ch.record.delta);
    BlockRecord b;
    b.first_entry = first;
    b.entries = n;
    if (id == Channel::kT) {
      b.min_key = static_cast<std::int64_t>(values.front());
      b.max_key = static_cast<std::int64_t>(values.back());
    }
    ch.payloads.push_back(codec.encode(raw, ch.record.elem_size));
    b.stored_bytes = ch.payloads.back().size();
    ch.record.blocks.push_back(b);
  }
  return ch;
}

PendingChannel pack_image_channel(Channel id, const std::vector<std::vector<double>>& images,
                                  const Codec& codec) {
  PendingChannel ch;
  ch.record.id = id;
  ch.record.elem_size = 8;
  std::uint64_t first = 0;
  for (const auto& values : images) {
    const auto raw = serialize_block<double>(values, false);
    BlockRecord b;
    b.first_entry = first;
    b.entries = values.size();
    ch.payloads.push_back(codec.encode(raw, 8));
    b.stored_bytes = ch.payloads.back().size();
    ch.record.blocks.push_back(b);
    first += values.size();
  }
  ch.record.entries = first;
  return ch;
}

void validate_inputs(const EventStream& events, std::span<const GrayFrame> frames,
                     std::span<const FlowField> flows) {
  const SensorConfig& s = events.sensor();
  for (std::size_t k = 0; k < frames.size(); ++k) {
    if (frames[k].width() != s.width || frames[k].height() != s.height) {
      throw ContractError(fmt::format("gray frame {} does not match sensor size", k));
    }
    if (frames[k].t < 0) throw ContractError("negative frame timestamp");
    if (k > 0 && frames[k].t <= frames[k - 1].t) {
      throw ContractError("gray frames must have strictly increasing timestamps");
    }
  }
  for (std::size_t k = 0; k < flows.size(); ++k) {
    flows[k].validate();
    if (flows[k].width() != s.width || flows[k].height() != s.height) {
      throw ContractError(fmt::format("flow field {} does not match sensor size", k));
    }
    if (flows[k].t0 < 0) throw ContractError("negative flow timestamp");
    if (k > 0 && flows[k].t0 < flows[k - 1].t0) {
      throw ContractError("flow fields must be sorted by t0");
    }
  }
}

class TempFile {
 public:
  explicit TempFile(std::filesystem::path target)
      : target_(std::move(target)), tmp_(target_.string() + ".tmp") {}
  ~TempFile() {
    if (!committed_) {
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }
  const std::filesystem::path& tmp() const { return tmp_; }
  void commit() {
    std::error_code ec;
    std::filesystem::rename(tmp_, target_, ec);
    if (ec) throw IoError("cannot move container into place: " + ec.message());
    committed_ = true;
  }

 private:
  std::filesystem::path target_;
  std::filesystem::path tmp_;
  bool committed_ = false;
};

// ---------------------------------------------------------------- reading

class File {
 public:
  explicit File(const std::filesystem::path& path) {
    fd_ = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd_ < 0) {
      throw IoError(fmt::format("cannot open {}: {}", path.string(), std::strerror(errno)));
    }
  }
  ~File() {
    if (fd_ >= 0) ::close(fd_);
  }
  File(File&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  File& operator=(File&& o) noexcept {
    if (this != &o) {
      if (fd_ >= 0) ::close(fd_);
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }

  /// pread-based, so concurrent calls do not share a file position.
  std::vector<std::uint8_t> read_at(std::uint64_t offset, std::size_t n) const {
    std::vector<std::uint8_t> buf(n);
    std::size_t done = 0;
    while (done < n) {
      const ssize_t r = ::pread(fd_, buf.data() + done, n - done,
                                static_cast<off_t>(offset + done));
      if (r < 0) {
        if (errno == EINTR) continue;
        throw IoError(std::string("read failed: ") + std::strerror(errno));
      }
      if (r == 0) throw FormatError("container truncated");
      done += static_cast<std::size_t>(r);
    }
    return buf;
  }

 private:
  int fd_ = -1;
};

std::size_t first_at_or_after(std::span<const TimeUs> times,
                              std::span<const std::uint64_t> ms_map, TimeUs t) {
  // Bracket with the ms map, then binary-search inside the bracket.
  std::size_t lo = 0;
  std::size_t hi = times.size();
  if (!ms_map.empty() && t >= 0) {
    const auto k = static_cast<std::size_t>(t / 1000);
    if (k < ms_map.size()) lo = ms_map[k];
    else lo = ms_map.back();
    if (k + 1 < ms_map.size()) hi = ms_map[k + 1];
  }
  lo = std::min(lo, times.size());
  hi = std::clamp(hi, lo, times.size());
  return static_cast<std::size_t>(
      std::lower_bound(times.begin() + static_cast<std::ptrdiff_t>(lo),
                       times.begin() + static_cast<std::ptrdiff_t>(hi), t) -
      times.begin());
}

}  // namespace

// ------------------------------------------------------------------ maps

TimeMaps build_time_maps(std::span<const TimeUs> event_t, std::span<const TimeUs> gray_t,
                         std::span<const TimeUs> flow_t0) {
  TimeUs max_t = 0;
  if (!event_t.empty()) max_t = std::max(max_t, event_t.back());
  if (!gray_t.empty()) max_t = std::max(max_t, gray_t.back());
  if (!flow_t0.empty()) max_t = std::max(max_t, flow_t0.back());
  const std::size_t len = static_cast<std::size_t>(max_t / 1000) + 2;

  auto build = [len](std::span<const TimeUs> times) {
    std::vector<std::uint64_t> map(len);
    std::size_t i = 0;
    for (std::size_t k = 0; k < len; ++k) {
      const TimeUs bound = static_cast<TimeUs>(k) * 1000;
      while (i < times.size() && times[i] < bound) ++i;
      map[k] = i;
    }
    map[len - 1] = times.size();
    return map;
  };
  return {build(event_t), build(gray_t), build(flow_t0)};
}

std::vector<std::int64_t> link_events(std::span<const TimeUs> event_t,
                                      std::span<const TimeUs> item_t) {
  std::vector<std::int64_t> out(event_t.size());
  std::int64_t j = -1;
  for (std::size_t i = 0; i < event_t.size(); ++i) {
    while (j + 1 < static_cast<std::int64_t>(item_t.size()) &&
           item_t[static_cast<std::size_t>(j + 1)] <= event_t[i]) {
      ++j;
    }
    out[i] = j;
  }
  return out;
}

// ---------------------------------------------------------------- writer

ContainerInfo write_container(const std::filesystem::path& path, const EventStream& events,
                              std::span<const GrayFrame> frames,
                              std::span<const FlowField> flows, const WriteOptions& options) {
  if (options.block_entries == 0) throw ContractError("block_entries must be positive");
  validate_inputs(events, frames, flows);
  const auto codec = make_codec(options.codec);
  const SensorConfig& sensor = events.sensor();
  const std::size_t n = events.size();

  std::vector<std::uint16_t> xs(n), ys(n);
  std::vector<std::int64_t> ts(n);
  std::vector<std::uint8_t> ps(n);
  for (std::size_t i = 0; i < n; ++i) {
    xs[i] = events[i].x;
    ys[i] = events[i].y;
    ts[i] = events[i].t;
    ps[i] = events[i].positive() ? 1 : 0;
  }
  std::vector<TimeUs> gray_t;
  for (const auto& f : frames) gray_t.push_back(f.t);
  std::vector<TimeUs> flow_t0;
  for (const auto& f : flows) flow_t0.push_back(f.t0);

  const TimeMaps maps = build_time_maps(ts, gray_t, flow_t0);
  const auto e2g = link_events(ts, gray_t);
  const auto e2f = link_events(ts, flow_t0);

  std::vector<std::vector<double>> gray_blocks;
  for (const auto& f : frames) gray_blocks.push_back(f.intensity.data());
  std::vector<std::vector<double>> flow_blocks;
  for (const auto& f : flows) {
    std::vector<double> uv(f.u.data());
    uv.insert(uv.end(), f.v.data().begin(), f.v.data().end());
    flow_blocks.push_back(std::move(uv));
  }

  const std::uint32_t be = options.block_entries;
  std::vector<PendingChannel> channels;
  channels.push_back(pack_event_channel<std::uint16_t>(Channel::kX, xs, be, *codec));
  channels.push_back(pack_event_channel<std::uint16_t>(Channel::kY, ys, be, *codec));
  channels.push_back(pack_event_channel<std::int64_t>(Channel::kT, ts, be, *codec));
  channels.push_back(pack_event_channel<std::uint8_t>(Channel::kP, ps, be, *codec));
  channels.push_back(pack_image_channel(Channel::kGray, gray_blocks, *codec));
  channels.push_back(pack_image_channel(Channel::kFlow, flow_blocks, *codec));
  channels.push_back(pack_event_channel<std::int64_t>(Channel::kEventToGray, e2g, be, *codec));
  channels.push_back(pack_event_channel<std::int64_t>(Channel::kEventToFlow, e2f, be, *codec));

  std::uint64_t table_bytes = 4;
  for (const auto& ch : channels) {
    table_bytes += kChannelRecordBytes + ch.record.blocks.size() * kBlockRecordBytes;
  }
  const std::uint64_t index_bytes =
      8 * gray_t.size() + 16 * flows.size() + 3 * 8 * maps.ms_to_event.size();
  std::uint64_t offset = kHeaderBytes + table_bytes + index_bytes;
  ContainerInfo info;
  info.path = path;
  info.raw_event_bytes = n * (2 + 2 + 8 + 1);
  for (auto& ch : channels) {
    for (std::size_t b = 0; b < ch.record.blocks.size(); ++b) {
      ch.record.blocks[b].offset = offset;
      offset += ch.payloads[b].size();
      if (ch.record.id <= Channel::kP) info.stored_event_bytes += ch.payloads[b].size();
    }
  }

  std::vector<std::uint8_t> head;
  head.reserve(kHeaderBytes + table_bytes + index_bytes);
  head.insert(head.end(), kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(head, kFormatVersion);
  put_le<std::uint32_t>(head, static_cast<std::uint32_t>(options.codec));
  put_le<std::uint32_t>(head, be);
  put_le<std::uint32_t>(head, static_cast<std::uint32_t>(sensor.width));
  put_le<std::uint32_t>(head, static_cast<std::uint32_t>(sensor.height));
  put_le<double>(head, sensor.fov_deg);
  put_le<double>(head, sensor.c_pos);
  put_le<double>(head, sensor.c_neg);
  put_le<std::int64_t>(head, sensor.refractory_ns);
  put_le<double>(head, sensor.frame_rate);
  put_le<double>(head, sensor.compare_rate);
  put_le<std::uint64_t>(head, n);
  put_le<std::uint64_t>(head, frames.size());
  put_le<std::uint64_t>(head, flows.size());
  put_le<std::uint64_t>(head, maps.ms_to_event.size());
  put_le<std::uint64_t>(head, table_bytes);

  put_le<std::uint32_t>(head, static_cast<std::uint32_t>(channels.size()));
  for (const auto& ch : channels) {
    put_le<std::uint32_t>(head, static_cast<std::uint32_t>(ch.record.id));
    put_le<std::uint32_t>(head, ch.record.elem_size);
    put_le<std::uint32_t>(head, ch.record.delta ? 1 : 0);
    put_le<std::uint32_t>(head, 0);
    put_le<std::uint64_t>(head, ch.record.entries);
    put_le<std::uint64_t>(head, ch.record.blocks.size());
    for (const auto& b : ch.record.blocks) {
      put_le<std::uint64_t>(head, b.offset);
      put_le<std::uint64_t>(head, b.stored_bytes);
      put_le<std::uint64_t>(head, b.first_entry);
      put_le<std::uint64_t>(head, b.entries);
      put_le<std::int64_t>(head, b.min_key);
      put_le<std::int64_t>(head, b.max_key);
    }
  }
  for (TimeUs t : gray_t) put_le<std::int64_t>(head, t);
  for (const auto& f : flows) {
    put_le<std::int64_t>(head, f.t0);
    put_le<std::int64_t>(head, f.t1);
  }
  for (const auto* m : {&maps.ms_to_event, &maps.ms_to_gray, &maps.ms_to_flow}) {
    for (std::uint64_t v : *m) put_le<std::uint64_t>(head, v);
  }

  TempFile tmp(path);
  {
    std::ofstream out(tmp.tmp(), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.tmp().string() + " for writing");
    out.write(reinterpret_cast<const char*>(head.data()),
              static_cast<std::streamsize>(head.size()));
    for (const auto& ch : channels) {
      for (const auto& p : ch.payloads) {
        out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size()));
      }
    }
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.tmp().string());
  }
  tmp.commit();
  info.file_bytes = offset;
  return info;
}

// ---------------------------------------------------------------- reader

struct ContainerReader::Impl {
  std::filesystem::path path;
  File file;
  SensorConfig sensor;
  CodecId codec_id{};
  std::unique_ptr<Codec> codec;
  std::uint32_t block_entries = 0;
  std::uint64_t n_events = 0;
  std::vector<ChannelRecord> channels;
  std::vector<TimeUs> gray_t;
  std::vector<TimeSpan> flow_spans;
  TimeMaps maps;

  explicit Impl(const std::filesystem::path& p) : path(p), file(p) {}

  const ChannelRecord& channel(Channel id) const {
    return channels[static_cast<std::size_t>(id)];
  }

  std::vector<std::uint8_t> decode_block(const ChannelRecord& ch, std::size_t b) const {
    const BlockRecord& rec = ch.blocks[b];
    const auto stored = file.read_at(rec.offset, rec.stored_bytes);
    return codec->decode(stored, rec.entries * ch.elem_size, ch.elem_size);
  }

  template <typename T>
  std::vector<T> decode_values(const ChannelRecord& ch, std::size_t b) const {
    const auto raw = decode_block(ch, b);
    const std::size_t n = ch.blocks[b].entries;
    std::vector<T> out(n);
    T acc{};
    for (std::size_t i = 0; i < n; ++i) {
      const T v = detail::get_le<T>(raw.data() + i * sizeof(T));
      if (ch.delta && i > 0) {
        acc = static_cast<T>(acc + v);
      } else {
        acc = v;
      }
      out[i] = acc;
    }
    return out;
  }

  /// Entries [begin, end) of an event channel.
  template <typename T>
  std::vector<T> read_range(Channel id, std::uint64_t begin, std::uint64_t end) const {
    std::vector<T> out;
    if (begin >= end) return out;
    out.reserve(end - begin);
    const ChannelRecord& ch = channel(id);
    const std::size_t b0 = begin / block_entries;
    const std::size_t b1 = (end - 1) / block_entries;
    for (std::size_t b = b0; b <= b1; ++b) {
      const auto values = decode_values<T>(ch, b);
      const std::uint64_t first = ch.blocks[b].first_entry;
      const std::uint64_t lo = std::max(begin, first) - first;
      const std::uint64_t hi = std::min(end, first + values.size()) - first;
      out.insert(out.end(), values.begin() + static_cast<std::ptrdiff_t>(lo),
                 values.begin() + static_cast<std::ptrdiff_t>(hi));
    }
    return out;
  }
};

ContainerReader::ContainerReader(const std::filesystem::path& path)
    : impl_(std::make_unique<Impl>(path)) {
  Impl& m = *impl_;
  const auto header = m.file.read_at(0, kHeaderBytes);
  if (!std::equal(kMagic.begin(), kMagic.end(), header.begin())) {
    throw FormatError(path.string() + ": not an evz container (bad magic)");
  }
  Cursor c(header);
  c.bytes(4);
  const auto version = c.get<std::uint32_t>();
  if (version != kFormatVersion) {
    throw FormatError(fmt::format("{}: unsupported container version {}", path.string(), version));
  }
  m.codec_id = static_cast<CodecId>(c.get<std::uint32_t>());
  m.codec = make_codec(m.codec_id);
  m.block_entries = c.get<std::uint32_t>();
  if (m.block_entries == 0) throw FormatError("container block size is zero");
  m.sensor.width = static_cast<int>(c.get<std::uint32_t>());
  m.sensor.height = static_cast<int>(c.get<std::uint32_t>());
  m.sensor.fov_deg = c.get<double>();
  m.sensor.c_pos = c.get<double>();
  m.sensor.c_neg = c.get<double>();
  m.sensor.refractory_ns = c.get<std::int64_t>();
  m.sensor.frame_rate = c.get<double>();
  m.sensor.compare_rate = c.get<double>();
  m.n_events = c.get<std::uint64_t>();
  const auto n_gray = c.get<std::uint64_t>();
  const auto n_flow = c.get<std::uint64_t>();
  const auto map_len = c.get<std::uint64_t>();
  const auto table_bytes = c.get<std::uint64_t>();
  const std::uint64_t index_bytes = 8 * n_gray + 16 * n_flow + 24 * map_len;

  const auto meta = m.file.read_at(kHeaderBytes, table_bytes + index_bytes);
  Cursor t(meta);
  const auto n_channels = t.get<std::uint32_t>();
  if (n_channels != kChannelCount) throw FormatError("unexpected channel count");
  for (std::uint32_t i = 0; i < n_channels; ++i) {
    ChannelRecord ch;
    ch.id = static_cast<Channel>(t.get<std::uint32_t>());
    if (ch.id != static_cast<Channel>(i)) throw FormatError("channel table out of order");
    ch.elem_size = t.get<std::uint32_t>();
    ch.delta = t.get<std::uint32_t>() != 0;
    t.get<std::uint32_t>();
    ch.entries = t.get<std::uint64_t>();
    const auto n_blocks = t.get<std::uint64_t>();
    for (std::uint64_t b = 0; b < n_blocks; ++b) {
      BlockRecord r;
      r.offset = t.get<std::uint64_t>();
      r.stored_bytes = t.get<std::uint64_t>();
      r.first_entry = t.get<std::uint64_t>();
      r.entries = t.get<std::uint64_t>();
      r.min_key = t.get<std::int64_t>();
      r.max_key = t.get<std::int64_t>();
      ch.blocks.push_back(r);
    }
    m.channels.push_back(std::move(ch));
  }
  for (std::uint64_t k = 0; k < n_gray; ++k) m.gray_t.push_back(t.get<std::int64_t>());
  for (std::uint64_t k = 0; k < n_flow; ++k) {
    TimeSpan s;
    s.begin = t.get<std::int64_t>();
    s.end = t.get<std::int64_t>();
    m.flow_spans.push_back(s);
  }
  for (auto* map : {&m.maps.ms_to_event, &m.maps.ms_to_gray, &m.maps.ms_to_flow}) {
    map->resize(map_len);
    for (auto& v : *map) v = t.get<std::uint64_t>();
  }
  if (m.channel(Channel::kGray).blocks.size() != n_gray ||
      m.channel(Channel::kFlow).blocks.size() != n_flow) {
    throw FormatError("block table inconsistent with header counts");
  }
}

ContainerReader::~ContainerReader() = default;
ContainerReader::ContainerReader(ContainerReader&&) noexcept = default;
ContainerReader& ContainerReader::operator=(ContainerReader&&) noexcept = default;

const std::filesystem::path& ContainerReader::path() const { return impl_->path; }
const SensorConfig& ContainerReader::sensor() const { return impl_->sensor; }
CodecId ContainerReader::codec() const { return impl_->codec_id; }
std::uint32_t ContainerReader::block_entries() const { return impl_->block_entries; }
std::uint64_t ContainerReader::event_count() const { return impl_->n_events; }
std::size_t ContainerReader::gray_count() const { return impl_->gray_t.size(); }
std::size_t ContainerReader::flow_count() const { return impl_->flow_spans.size(); }
const TimeMaps& ContainerReader::time_maps() const { return impl_->maps; }
std::span<const TimeUs> ContainerReader::gray_times() const { return impl_->gray_t; }
std::span<const TimeSpan> ContainerReader::flow_spans() const { return impl_->flow_spans; }

TimeSpan ContainerReader::recording_range() const {
  const Impl& m = *impl_;
  TimeSpan r;
  TimeUs last_event_end = 0;
  TimeUs first_event = 0;
  if (m.n_events > 0) {
    const auto& tb = m.channel(Channel::kT).blocks;
    first_event = tb.front().min_key;
    last_event_end = tb.back().max_key + 1;
  }
  r.begin = m.gray_t.empty() ? first_event : m.gray_t.front();
  r.end = std::max(m.gray_t.empty() ? r.begin : m.gray_t.back(), last_event_end);
  if (!m.flow_spans.empty()) r.end = std::max(r.end, m.flow_spans.back().end);
  return r;
}

std::uint64_t ContainerReader::lower_index(TimeUs time) const {
  const Impl& m = *impl_;
  if (m.n_events == 0 || time <= 0) return 0;
  const auto& map = m.maps.ms_to_event;
  const auto k = static_cast<std::size_t>(time / 1000);
  if (k + 1 >= map.size()) return m.n_events;
  const std::uint64_t lo = map[k];
  const std::uint64_t hi = map[k + 1];
  if (lo == hi || time == static_cast<TimeUs>(k) * 1000) return lo;

  // First event with t >= time lies in [lo, hi]; scan the covering t blocks.
  const ChannelRecord& ch = m.channel(Channel::kT);
  for (std::size_t b = lo / m.block_entries; b < ch.blocks.size(); ++b) {
    const BlockRecord& rec = ch.blocks[b];
    if (rec.first_entry >= hi) break;
    if (rec.max_key < time) continue;
    const auto values = m.decode_values<std::int64_t>(ch, b);
    const std::uint64_t from = std::max(lo, rec.first_entry) - rec.first_entry;
    const auto it = std::lower_bound(values.begin() + static_cast<std::ptrdiff_t>(from),
                                     values.end(), time);
    return rec.first_entry + static_cast<std::uint64_t>(it - values.begin());
  }
  return hi;
}

std::vector<Event> ContainerReader::read_events(std::uint64_t begin, std::uint64_t end) const {
  const Impl& m = *impl_;
  end = std::min(end, m.n_events);
  if (begin >= end) return {};
  const auto xs = m.read_range<std::uint16_t>(Channel::kX, begin, end);
  const auto ys = m.read_range<std::uint16_t>(Channel::kY, begin, end);
  const auto ts = m.read_range<std::int64_t>(Channel::kT, begin, end);
  const auto ps = m.read_range<std::uint8_t>(Channel::kP, begin, end);
  std::vector<Event> out(end - begin);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Event{xs[i], ys[i], ts[i], static_cast<std::int8_t>(ps[i] ? 1 : -1)};
  }
  return out;
}

EventStream ContainerReader::read_all_events() const {
  return EventStream(impl_->sensor, read_events(0, impl_->n_events));
}

GrayFrame ContainerReader::read_gray(std::size_t k) const {
  const Impl& m = *impl_;
  if (k >= m.gray_t.size()) throw RangeError(fmt::format("gray index {} out of range", k));
  auto values = m.decode_values<double>(m.channel(Channel::kGray), k);
  return GrayFrame{m.gray_t[k], ImageD(m.sensor.width, m.sensor.height, std::move(values))};
}

FlowField ContainerReader::read_flow(std::size_t k) const {
  const Impl& m = *impl_;
  if (k >= m.flow_spans.size()) throw RangeError(fmt::format("flow index {} out of range", k));
  const auto values = m.decode_values<double>(m.channel(Channel::kFlow), k);
  const std::size_t px = static_cast<std::size_t>(m.sensor.width) * m.sensor.height;
  FlowField f;
  f.t0 = m.flow_spans[k].begin;
  f.t1 = m.flow_spans[k].end;
  f.u = ImageD(m.sensor.width, m.sensor.height,
               std::vector<double>(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(px)));
  f.v = ImageD(m.sensor.width, m.sensor.height,
               std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(px), values.end()));
  return f;
}

std::vector<std::int64_t> ContainerReader::read_event_to_gray(std::uint64_t begin,
                                                              std::uint64_t end) const {
  return impl_->read_range<std::int64_t>(Channel::kEventToGray, begin,
                                         std::min(end, impl_->n_events));
}

std::vector<std::int64_t> ContainerReader::read_event_to_flow(std::uint64_t begin,
                                                              std::uint64_t end) const {
  return impl_->read_range<std::int64_t>(Channel::kEventToFlow, begin,
                                         std::min(end, impl_->n_events));
}

void ContainerReader::attach_frames_and_flow(SyncedSlice& slice,
                                             const SliceOptions& options) const {
  const Impl& m = *impl_;
  if (options.load_frames && !m.gray_t.empty()) {
    // Latest frame at or before the start.
    const std::size_t after = first_at_or_after(m.gray_t, m.maps.ms_to_gray, slice.span.begin + 1);
    if (after > 0) {
      slice.gray_start_index = static_cast<std::int64_t>(after - 1);
      slice.gray_start = read_gray(after - 1);
    }
    std::size_t end_idx = first_at_or_after(m.gray_t, m.maps.ms_to_gray, slice.span.end);
    if (end_idx >= m.gray_t.size()) {
      end_idx = m.gray_t.size() - 1;
      slice.gray_end_clamped = true;
    }
    slice.gray_end_index = static_cast<std::int64_t>(end_idx);
    slice.gray_end = read_gray(end_idx);
  }

  if (options.load_flow && !m.flow_spans.empty() && !slice.span.empty()) {
    // Latest flow starting at or before the span start, then walk forward.
    const auto it = std::upper_bound(m.flow_spans.begin(), m.flow_spans.end(), slice.span.begin,
                                     [](TimeUs t, const TimeSpan& s) { return t < s.begin; });
    if (it == m.flow_spans.begin()) return;
    std::size_t k = static_cast<std::size_t>(it - m.flow_spans.begin()) - 1;
    if (m.flow_spans[k].end <= slice.span.begin) return;
    std::vector<FlowField> covering;
    TimeUs reached = m.flow_spans[k].begin;
    for (; k < m.flow_spans.size() && reached < slice.span.end; ++k) {
      if (m.flow_spans[k].begin != reached && !covering.empty()) return;
      covering.push_back(read_flow(k));
      reached = m.flow_spans[k].end;
    }
    if (reached < slice.span.end) return;
    slice.flow = accumulate_flow(covering, slice.span.begin, slice.span.end);
  }
}

SyncedSlice ContainerReader::read_slice(TimeUs t_start, TimeUs t_end,
                                        const SliceOptions& options) const {
  if (t_start > t_end) throw ContractError("read_slice requires t_start <= t_end");
  const TimeSpan range = recording_range();
  if (t_start < range.begin || t_end > range.end) {
    throw RangeError(fmt::format("slice [{}, {}) us outside recorded range [{}, {}] us",
                                 t_start, t_end, range.begin, range.end));
  }
  SyncedSlice slice;
  slice.span = {t_start, t_end};
  const std::uint64_t i0 = lower_index(t_start);
  const std::uint64_t i1 = lower_index(t_end);
  slice.first_event = i0;
  slice.events = EventStream(impl_->sensor, read_events(i0, i1));
  attach_frames_and_flow(slice, options);
  return slice;
}

SyncedSlice ContainerReader::read_index_slice(std::uint64_t begin, std::uint64_t end,
                                              const SliceOptions& options) const {
  const std::uint64_t n = impl_->n_events;
  if (begin > end || end > n) throw RangeError("event index slice out of range");
  SyncedSlice slice;
  slice.first_event = begin;
  auto events = read_events(begin, end);
  if (begin < n) {
    slice.span.begin = events.empty() ? read_events(begin, begin + 1).front().t : events.front().t;
    slice.span.end = end < n ? read_events(end, end + 1).front().t
                             : read_events(n - 1, n).front().t + 1;
  }
  slice.events = EventStream(impl_->sensor, std::move(events));
  attach_frames_and_flow(slice, options);
  return slice;
}

// --------------------------------------------------------------- iterator

SliceIterator::SliceIterator(const ContainerReader& reader, StrideMode mode, std::int64_t step,
                             SliceOptions options)
    : reader_(&reader), mode_(mode), step_(step), options_(options) {
  if (step <= 0) throw ContractError("iteration step must be positive");
}

std::size_t SliceIterator::count() const {
  const auto step = static_cast<std::uint64_t>(step_);
  switch (mode_) {
    case StrideMode::kEventCount:
      return static_cast<std::size_t>((reader_->event_count() + step - 1) / step);
    case StrideMode::kTime: {
      const TimeSpan r = reader_->recording_range();
      if (r.empty()) return 0;
      return static_cast<std::size_t>((static_cast<std::uint64_t>(r.duration()) + step - 1) / step);
    }
    case StrideMode::kGrayIndex:
      return reader_->gray_count() < 2 ? 0 : (reader_->gray_count() - 1) / step;
  }
  return 0;
}

std::optional<SyncedSlice> SliceIterator::next() {
  if (position_ >= count()) return std::nullopt;
  const std::size_t j = position_++;
  switch (mode_) {
    case StrideMode::kEventCount: {
      const std::uint64_t b = j * static_cast<std::uint64_t>(step_);
      const std::uint64_t e = std::min(reader_->event_count(), b + static_cast<std::uint64_t>(step_));
      return reader_->read_index_slice(b, e, options_);
    }
    case StrideMode::kTime: {
      const TimeSpan r = reader_->recording_range();
      const TimeUs b = r.begin + static_cast<TimeUs>(j) * step_;
      const TimeUs e = std::min(r.end, b + step_);
      return reader_->read_slice(b, e, options_);
    }
    case StrideMode::kGrayIndex: {
      const auto times = reader_->gray_times();
      const std::size_t k = j * static_cast<std::size_t>(step_);
      return reader_->read_slice(times[k], times[k + static_cast<std::size_t>(step_)], options_);
    }
  }
  return std::nullopt;
}

std::vector<SyncedSlice> iterate(const ContainerReader& reader, StrideMode mode,
                                 std::int64_t step, SliceOptions options) {
  SliceIterator it(reader, mode, step, options);
  std::vector<SyncedSlice> out;
  while (auto s = it.next()) out.push_back(std::move(*s));
  return out;
}

}  // namespace evkit::store
