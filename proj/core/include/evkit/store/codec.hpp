#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace evkit::store {

enum class CodecId : std::uint32_t {
  kRaw = 0,
  kZlib = 1,
  /// Byte-shuffle (group the k-th byte of every element together) followed
  /// by zlib. Numeric columns compress much better after shuffling.
  kShuffleZlib = 2,
};

/// Lossless byte-level block codec.
class Codec {
 public:
  virtual ~Codec() = default;
  virtual CodecId id() const = 0;
  virtual std::vector<std::uint8_t> encode(std::span<const std::uint8_t> raw,
                                           std::size_t elem_size) const = 0;
  /// Throws FormatError if `stored` does not decode to exactly raw_size bytes.
  virtual std::vector<std::uint8_t> decode(std::span<const std::uint8_t> stored,
                                           std::size_t raw_size,
                                           std::size_t elem_size) const = 0;
};

std::unique_ptr<Codec> make_codec(CodecId id);

void byte_shuffle(std::span<const std::uint8_t> in, std::size_t elem_size,
                  std::span<std::uint8_t> out);
void byte_unshuffle(std::span<const std::uint8_t> in, std::size_t elem_size,
                    std::span<std::uint8_t> out);

}  // namespace evkit::store
