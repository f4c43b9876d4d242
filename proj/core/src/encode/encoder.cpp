#include "evkit/encode/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "evkit/util/netpbm.hpp"

namespace evkit::encode {

void EncoderConfig::validate() const {
  if (bins < 1) throw ContractError("encoder needs at least one bin");
  if (!(lambda > 0.0)) throw ContractError("encoder lambda must be positive");
}

EncodedVolume::EncodedVolume(int bins, int channels, int width, int height, TimeSpan span)
    : bins_(bins), channels_(channels), width_(width), height_(height), span_(span),
      values_(static_cast<std::size_t>(bins) * channels * width * height, 0.0) {}

ImageD EncodedVolume::plane(int bin, int channel) const {
  ImageD img(width_, height_);
  const auto first = values_.begin() + static_cast<std::ptrdiff_t>(index(bin, channel, 0, 0));
  std::copy(first, first + static_cast<std::ptrdiff_t>(img.size()), img.data().begin());
  return img;
}

double EncodedVolume::sum() const { return std::accumulate(values_.begin(), values_.end(), 0.0); }

__extension__ using Int128 = __int128;

int bin_of(TimeUs t, const TimeSpan& span, int bins) {
  if (!span.contains(t)) return -1;
  // Exact integer arithmetic so bin edges never depend on rounding.
  const auto num = static_cast<Int128>(t - span.begin) * bins;
  return static_cast<int>(num / span.duration());
}

namespace {

int channel_count(ChannelMode mode) { return mode == ChannelMode::kTwoChannel ? 2 : 1; }

void check(const EventStream& stream, const EncoderConfig& cfg, const TimeSpan& span) {
  cfg.validate();
  if (span.empty()) throw ContractError("cannot encode an empty time span");
  (void)stream;
}

TimeSpan own_span(const EventStream& stream) {
  const TimeSpan s = stream.span();
  if (s.empty()) throw ContractError("cannot encode an empty time span");
  return s;
}

}  // namespace

EncodedVolume encode_count(const EventStream& stream, const EncoderConfig& cfg,
                           const TimeSpan& span) {
  check(stream, cfg, span);
  const SensorConfig& s = stream.sensor();
  EncodedVolume vol(cfg.bins, channel_count(cfg.channel_mode), s.width, s.height, span);
  for (const Event& e : stream) {
    const int b = bin_of(e.t, span, cfg.bins);
    if (b < 0) continue;
    if (cfg.channel_mode == ChannelMode::kTwoChannel) {
      vol.at(b, e.positive() ? 0 : 1, e.x, e.y) += 1.0;
    } else {
      vol.at(b, 0, e.x, e.y) += e.p;
    }
  }
  return vol;
}

EncodedVolume encode_count(const EventStream& stream, const EncoderConfig& cfg) {
  return encode_count(stream, cfg, own_span(stream));
}

EncodedVolume encode_gaussian(const EventStream& stream, const EncoderConfig& cfg,
                              const TimeSpan& span) {
  check(stream, cfg, span);
  const SensorConfig& s = stream.sensor();
  EncodedVolume vol(cfg.bins, channel_count(cfg.channel_mode), s.width, s.height, span);
  const double width_s = us_to_s(span.duration()) / cfg.bins;
  const double sigma = cfg.lambda * width_s;
  const double t0 = us_to_s(span.begin);
  std::vector<double> centers(static_cast<std::size_t>(cfg.bins));
  for (int b = 0; b < cfg.bins; ++b) centers[static_cast<std::size_t>(b)] = t0 + (b + 0.5) * width_s;

  for (const Event& e : stream) {
    if (!span.contains(e.t)) continue;
    const double te = us_to_s(e.t);
    for (int b = 0; b < cfg.bins; ++b) {
      const double dt = te - centers[static_cast<std::size_t>(b)];
      const double w = cfg.kernel ? cfg.kernel(dt, sigma)
                                  : std::exp(-(dt * dt) / (2.0 * sigma * sigma));
      if (cfg.channel_mode == ChannelMode::kTwoChannel) {
        vol.at(b, e.positive() ? 0 : 1, e.x, e.y) += w;
      } else {
        vol.at(b, 0, e.x, e.y) += w * e.p;
      }
    }
  }
  return vol;
}

EncodedVolume encode_gaussian(const EventStream& stream, const EncoderConfig& cfg) {
  return encode_gaussian(stream, cfg, own_span(stream));
}

EncodedVolume encode(const EventStream& stream, const EncoderConfig& cfg, const TimeSpan& span) {
  return cfg.scheme == Scheme::kCount ? encode_count(stream, cfg, span)
                                      : encode_gaussian(stream, cfg, span);
}

std::vector<std::filesystem::path> export_volume_pgm(const EncodedVolume& volume,
                                                     const std::filesystem::path& dir,
                                                     const std::string& stem) {
  std::filesystem::create_directories(dir);
  const auto [lo_it, hi_it] = std::minmax_element(volume.values().begin(), volume.values().end());
  double lo = lo_it == volume.values().end() ? 0.0 : *lo_it;
  double hi = hi_it == volume.values().end() ? 1.0 : *hi_it;
  if (hi <= lo) hi = lo + 1.0;
  std::vector<std::filesystem::path> written;
  for (int b = 0; b < volume.bins(); ++b) {
    for (int c = 0; c < volume.channels(); ++c) {
      auto path = dir / fmt::format("{}_b{:03d}_c{}.pgm", stem, b, c);
      write_pgm(path, volume.plane(b, c), lo, hi);
      written.push_back(std::move(path));
    }
  }
  return written;
}

}  // namespace evkit::encode
