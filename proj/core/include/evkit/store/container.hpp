#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "evkit/event.hpp"
#include "evkit/store/codec.hpp"

namespace evkit::store {

// .evz layout (all integers little-endian, floats IEEE-754 binary64):
//
//   header   magic "EVZ1", u32 version, u32 codec, u32 block_entries,
//            sensor {u32 w, u32 h, f64 fov, f64 c_pos, f64 c_neg,
//                    i64 refractory_ns, f64 frame_rate, f64 compare_rate},
//            u64 n_events, u64 n_gray, u64 n_flow, u64 ms_map_len,
//            u64 table_bytes
//   table    u32 n_channels, then per channel:
//              u32 id, u32 elem_size, u32 delta, u32 reserved,
//              u64 n_entries, u64 n_blocks,
//              n_blocks x {u64 offset, u64 stored_bytes, u64 first_entry,
//                          u64 entries, i64 min_key, i64 max_key}
//   index    i64 gray_t[n_gray], {i64 t0, i64 t1}[n_flow],
//            u64 ms_to_event[L], u64 ms_to_gray[L], u64 ms_to_flow[L]
//   blocks   codec payloads, channel by channel, in block order
//
// Event channels hold `block_entries` entries per block; gray holds one frame
// per block, flow one field (u plane then v plane) per block. Delta channels
// store each block's first value verbatim and successive differences after.

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kDefaultBlockEntries = 8 * 1024;

enum class Channel : std::uint32_t {
  kX = 0,
  kY = 1,
  kT = 2,
  kP = 3,
  kGray = 4,
  kFlow = 5,
  kEventToGray = 6,
  kEventToFlow = 7,
};
inline constexpr std::size_t kChannelCount = 8;

/// Precomputed timestamp -> index maps at 1 ms resolution. Entry k of each
/// ms map is the index of the first item with time >= k ms; all maps share
/// one length L and the last entry equals the item count.
struct TimeMaps {
  std::vector<std::uint64_t> ms_to_event;
  std::vector<std::uint64_t> ms_to_gray;
  std::vector<std::uint64_t> ms_to_flow;
};

TimeMaps build_time_maps(std::span<const TimeUs> event_t, std::span<const TimeUs> gray_t,
                         std::span<const TimeUs> flow_t0);

/// Per-event index of the latest item with time <= event time, -1 if none.
std::vector<std::int64_t> link_events(std::span<const TimeUs> event_t,
                                      std::span<const TimeUs> item_t);

struct WriteOptions {
  CodecId codec = CodecId::kShuffleZlib;
  std::uint32_t block_entries = kDefaultBlockEntries;
};

struct ContainerInfo {
  std::filesystem::path path;
  std::uint64_t file_bytes = 0;
  /// Uncompressed columnar size of the event channels (2+2+8+1 bytes/event).
  std::uint64_t raw_event_bytes = 0;
  /// Stored size of the event channels after compression.
  std::uint64_t stored_event_bytes = 0;
};

/// Writes a self-contained container. Events must be time-sorted, frames
/// strictly increasing in time and flows sorted by t0; all images must match
/// the sensor resolution. The file is written to a temporary sibling and
/// renamed into place, so a failed write leaves nothing behind.
ContainerInfo write_container(const std::filesystem::path& path, const EventStream& events,
                              std::span<const GrayFrame> frames,
                              std::span<const FlowField> flows,
                              const WriteOptions& options = {});

struct SliceOptions {
  bool load_frames = true;
  bool load_flow = true;
};

/// Events of a span with the frames that bracket it and flow over it.
struct SyncedSlice {
  TimeSpan span;
  std::uint64_t first_event = 0;
  EventStream events;
  std::optional<GrayFrame> gray_start;
  std::optional<GrayFrame> gray_end;
  std::int64_t gray_start_index = -1;
  std::int64_t gray_end_index = -1;
  /// No frame at or after span.end; gray_end is the last frame instead.
  bool gray_end_clamped = false;
  std::optional<FlowField> flow;
};

/// Read-only view of a container. Only the header, block table and ms maps
/// are held in memory; blocks are fetched on demand. Every const member is
/// safe to call concurrently.
class ContainerReader {
 public:
  explicit ContainerReader(const std::filesystem::path& path);
  ~ContainerReader();
  ContainerReader(ContainerReader&&) noexcept;
  ContainerReader& operator=(ContainerReader&&) noexcept;
  ContainerReader(const ContainerReader&) = delete;
  ContainerReader& operator=(const ContainerReader&) = delete;

  const std::filesystem::path& path() const;
  const SensorConfig& sensor() const;
  CodecId codec() const;
  std::uint32_t block_entries() const;
  std::uint64_t event_count() const;
  std::size_t gray_count() const;
  std::size_t flow_count() const;

  const TimeMaps& time_maps() const;
  std::span<const TimeUs> gray_times() const;
  std::span<const TimeSpan> flow_spans() const;

  /// Span that read_slice accepts: from the first frame (or first event when
  /// there are no frames) to max(last frame, last event + 1).
  TimeSpan recording_range() const;

  /// Index of the first event with t >= time.
  std::uint64_t lower_index(TimeUs time) const;

  std::vector<Event> read_events(std::uint64_t begin, std::uint64_t end) const;
  EventStream read_all_events() const;
  GrayFrame read_gray(std::size_t k) const;
  FlowField read_flow(std::size_t k) const;
  std::vector<std::int64_t> read_event_to_gray(std::uint64_t begin, std::uint64_t end) const;
  std::vector<std::int64_t> read_event_to_flow(std::uint64_t begin, std::uint64_t end) const;

  /// Slice by time. Throws RangeError naming the valid range when the span
  /// leaves recording_range(); ContractError when t_start > t_end.
  SyncedSlice read_slice(TimeUs t_start, TimeUs t_end, const SliceOptions& options = {}) const;
  /// Slice by event index [begin, end); span runs from the first event to the
  /// time of event `end` (or last event + 1).
  SyncedSlice read_index_slice(std::uint64_t begin, std::uint64_t end,
                               const SliceOptions& options = {}) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;

  void attach_frames_and_flow(SyncedSlice& slice, const SliceOptions& options) const;
};

enum class StrideMode { kEventCount, kTime, kGrayIndex };

/// Sequential, non-overlapping slices covering the recording.
class SliceIterator {
 public:
  SliceIterator(const ContainerReader& reader, StrideMode mode, std::int64_t step,
                SliceOptions options = {});

  std::optional<SyncedSlice> next();
  /// Number of slices the iteration yields in total.
  std::size_t count() const;

 private:
  const ContainerReader* reader_;
  StrideMode mode_;
  std::int64_t step_;
  SliceOptions options_;
  std::size_t position_ = 0;
};

std::vector<SyncedSlice> iterate(const ContainerReader& reader, StrideMode mode,
                                 std::int64_t step, SliceOptions options = {});

}  // namespace evkit::store
