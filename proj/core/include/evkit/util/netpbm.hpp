#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "evkit/image.hpp"

namespace evkit {

using Rgb = std::array<std::uint8_t, 3>;

/// Writes a binary PGM (P5), mapping [lo, hi] linearly to [0, 255].
void write_pgm(const std::filesystem::path& path, const ImageD& img, double lo = 0.0,
               double hi = 1.0);
/// Reads a P2 or P5 PGM into [0, 1] intensities.
ImageD read_pgm(const std::filesystem::path& path);
/// Writes a binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Image<Rgb>& img);

}  // namespace evkit
