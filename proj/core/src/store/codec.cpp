#include "evkit/store/codec.hpp"

#include <zlib.h>

#include <cstring>
#include <string>

#include "evkit/error.hpp"

namespace evkit::store {

void byte_shuffle(std::span<const std::uint8_t> in, std::size_t elem_size,
                  std::span<std::uint8_t> out) {
  const std::size_t n = in.size() / elem_size;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < elem_size; ++b) out[b * n + i] = in[i * elem_size + b];
  }
  // Trailing bytes that do not form a whole element are copied as-is.
  for (std::size_t i = n * elem_size; i < in.size(); ++i) out[i] = in[i];
}

void byte_unshuffle(std::span<const std::uint8_t> in, std::size_t elem_size,
                    std::span<std::uint8_t> out) {
  const std::size_t n = in.size() / elem_size;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t b = 0; b < elem_size; ++b) out[i * elem_size + b] = in[b * n + i];
  }
  for (std::size_t i = n * elem_size; i < in.size(); ++i) out[i] = in[i];
}

namespace {

// Level 1 keeps writes fast; the output is fully determined by the input.
constexpr int kZlibLevel = 1;

std::vector<std::uint8_t> zlib_compress(std::span<const std::uint8_t> raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> out(bound);
  const int rc = compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()),
                           kZlibLevel);
  if (rc != Z_OK) throw IoError("zlib compress failed: " + std::to_string(rc));
  out.resize(bound);
  return out;
}

std::vector<std::uint8_t> zlib_decompress(std::span<const std::uint8_t> stored,
                                          std::size_t raw_size) {
  std::vector<std::uint8_t> out(raw_size);
  uLongf len = static_cast<uLongf>(raw_size);
  const int rc = uncompress(out.data(), &len, stored.data(), static_cast<uLong>(stored.size()));
  if (rc != Z_OK || len != raw_size) throw FormatError("corrupt zlib block");
  return out;
}

class RawCodec final : public Codec {
 public:
  CodecId id() const override { return CodecId::kRaw; }
  std::vector<std::uint8_t> encode(std::span<const std::uint8_t> raw,
                                   std::size_t) const override {
    return {raw.begin(), raw.end()};
  }
  std::vector<std::uint8_t> decode(std::span<const std::uint8_t> stored, std::size_t raw_size,
                                   std::size_t) const override {
    if (stored.size() != raw_size) throw FormatError("raw block size mismatch");
    return {stored.begin(), stored.end()};
  }
};

class ZlibCodec final : public Codec {
 public:
  CodecId id() const override { return CodecId::kZlib; }
  std::vector<std::uint8_t> encode(std::span<const std::uint8_t> raw,
                                   std::size_t) const override {
    return zlib_compress(raw);
  }
  std::vector<std::uint8_t> decode(std::span<const std::uint8_t> stored, std::size_t raw_size,
                                   std::size_t) const override {
    return zlib_decompress(stored, raw_size);
  }
};

class ShuffleZlibCodec final : public Codec {
 public:
  CodecId id() const override { return CodecId::kShuffleZlib; }
  std::vector<std::uint8_t> encode(std::span<const std::uint8_t> raw,
                                   std::size_t elem_size) const override {
    std::vector<std::uint8_t> shuffled(raw.size());
    byte_shuffle(raw, elem_size, shuffled);
    return zlib_compress(shuffled);
  }
  std::vector<std::uint8_t> decode(std::span<const std::uint8_t> stored, std::size_t raw_size,
                                   std::size_t elem_size) const override {
    const std::vector<std::uint8_t> shuffled = zlib_decompress(stored, raw_size);
    std::vector<std::uint8_t> out(raw_size);
    byte_unshuffle(shuffled, elem_size, out);
    return out;
  }
};

}  // namespace

std::unique_ptr<Codec> make_codec(CodecId id) {
  switch (id) {
    case CodecId::kRaw:
      return std::make_unique<RawCodec>();
    case CodecId::kZlib:
      return std::make_unique<ZlibCodec>();
    case CodecId::kShuffleZlib:
      return std::make_unique<ShuffleZlibCodec>();
  }
  throw FormatError("unknown codec id " + std::to_string(static_cast<std::uint32_t>(id)));
}

}  // namespace evkit::store
