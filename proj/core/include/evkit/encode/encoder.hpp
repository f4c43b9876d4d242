#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <vector>

#include "evkit/event.hpp"

namespace evkit::encode {

enum class Scheme { kGaussian, kCount };
enum class ChannelMode {
  kTwoChannel,  // channel 0 = positive events, channel 1 = negative events
  kSigned,      // single channel, polarity-signed
};

/// Temporal kernel weight for an event at time offset `dt` (seconds) from a
/// bin center, given the kernel width `sigma` (seconds).
using KernelFn = std::function<double(double dt, double sigma)>;

struct EncoderConfig {
  Scheme scheme = Scheme::kCount;
  int bins = 1;
  /// Gaussian width as a fraction of the bin width.
  double lambda = 0.5;
  ChannelMode channel_mode = ChannelMode::kTwoChannel;
  /// Replaces the peak-normalized Gaussian when set.
  KernelFn kernel;

  void validate() const;
};

/// Bins x channels x height x width tensor over a time span.
class EncodedVolume {
 public:
  EncodedVolume(int bins, int channels, int width, int height, TimeSpan span);

  int bins() const { return bins_; }
  int channels() const { return channels_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const TimeSpan& span() const { return span_; }

  double& at(int bin, int channel, int x, int y) { return values_[index(bin, channel, x, y)]; }
  double at(int bin, int channel, int x, int y) const {
    return values_[index(bin, channel, x, y)];
  }
  /// One bin/channel plane as an image.
  ImageD plane(int bin, int channel) const;
  const std::vector<double>& values() const { return values_; }
  double sum() const;

 private:
  std::size_t index(int bin, int channel, int x, int y) const {
    return ((static_cast<std::size_t>(bin) * channels_ + channel) * height_ + y) * width_ + x;
  }

  int bins_;
  int channels_;
  int width_;
  int height_;
  TimeSpan span_;
  std::vector<double> values_;
};

/// Bin index of time t in an evenly partitioned span, or -1 outside.
int bin_of(TimeUs t, const TimeSpan& span, int bins);

/// Per-bin event counts (two-channel) or their difference (signed). Events
/// outside `span` are ignored. Throws ContractError on an empty span.
EncodedVolume encode_count(const EventStream& stream, const EncoderConfig& cfg,
                           const TimeSpan& span);
/// Encodes over the stream's own span.
EncodedVolume encode_count(const EventStream& stream, const EncoderConfig& cfg);

/// Every event in `span` contributes to every bin with weight
/// exp(-(t - mu_b)^2 / (2 sigma^2)), mu_b the bin center and
/// sigma = lambda * bin width (unless cfg.kernel overrides the kernel).
EncodedVolume encode_gaussian(const EventStream& stream, const EncoderConfig& cfg,
                              const TimeSpan& span);
EncodedVolume encode_gaussian(const EventStream& stream, const EncoderConfig& cfg);

/// Dispatches on cfg.scheme.
EncodedVolume encode(const EventStream& stream, const EncoderConfig& cfg, const TimeSpan& span);

/// Writes one PGM per bin/channel plane, scaled to the volume's value range;
/// returns the written paths.
std::vector<std::filesystem::path> export_volume_pgm(const EncodedVolume& volume,
                                                     const std::filesystem::path& dir,
                                                     const std::string& stem);

}  // namespace evkit::encode
