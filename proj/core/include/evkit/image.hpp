#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evkit/error.hpp"

namespace evkit {

/// Dense row-major 2D buffer.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(checked(width, height)), fill) {}
  Image(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(checked(width, height))) {
      throw ContractError("Image: buffer size does not match dimensions");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }
  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  static long checked(int w, int h) {
    if (w < 0 || h < 0) throw ContractError("Image: negative dimensions");
    return static_cast<long>(w) * h;
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ImageD = Image<double>;

/// Bilinear sample with clamp-to-edge addressing.
double sample_bilinear_clamped(const ImageD& img, double x, double y);

/// Bilinear sample; returns false if (x, y) is outside [0, W-1] x [0, H-1].
bool sample_bilinear_inside(const ImageD& img, double x, double y, double& out);

}  // namespace evkit
