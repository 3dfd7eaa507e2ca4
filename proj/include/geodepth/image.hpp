// SPDX-License-Identifier: Apache-2.0

#ifndef GEODEPTH_IMAGE_HPP
#define GEODEPTH_IMAGE_HPP

#include <string>
#include <vector>

#include "geodepth/error.hpp"

namespace geodepth {

/// Dense row-major 2-D grid. (u, v) indexing: u is the column, v is the row,
/// matching pixel coordinates elsewhere in the library.
template <typename T>
class Image {
 public:
  Image() = default;

  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
      throw InputError("Image dimensions must be positive, got " +
                       std::to_string(width) + "x" + std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int u, int v) const {
    return u >= 0 && u < width_ && v >= 0 && v < height_;
  }

  T& at(int u, int v) { return data_[index(u, v)]; }
  const T& at(int u, int v) const { return data_[index(u, v)]; }

  T* row(int v) { return data_.data() + static_cast<std::size_t>(v) * width_; }
  const T* row(int v) const {
    return data_.data() + static_cast<std::size_t>(v) * width_;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v) * width_ + u;
  }

  bool operator==(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ &&
           data_ == other.data_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

}  // namespace geodepth

#endif  // GEODEPTH_IMAGE_HPP
