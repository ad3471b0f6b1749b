#pragma once

#include <cassert>
#include <span>
#include <vector>

#include "evhand/common.hpp"

namespace evhand {

/// Dense multi-channel image stored channel-major (one contiguous plane per
/// channel, rows of `width` inside each plane).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width <= 0 || height <= 0 || channels <= 0) {
      throw InvalidArgument("grid dimensions must be positive");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(width_) * height_; }
  std::size_t size() const { return data_.size(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::size_t index(int x, int y, int c = 0) const {
    assert(contains(x, y) && c >= 0 && c < channels_);
    return c * plane_size() + static_cast<std::size_t>(y) * width_ + x;
  }

  T& operator()(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& operator()(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<T> channel(int c) { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const T> channel(int c) const {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Grid&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<T> data_;
};

/// Inclusive-exclusive integer pixel rectangle.
struct PixelWindow {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
};

}  // namespace evhand
