#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pfpose/errors.hpp"

namespace pfpose {

// Dense row-major image with interleaved channels.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int rows, int cols, int channels = 1, T fill = T{})
      : rows_(rows), cols_(cols), channels_(channels) {
    if (rows < 0 || cols < 0 || channels < 1) {
      throw InvalidArgument("Image: invalid dimensions");
    }
    data_.assign(static_cast<std::size_t>(rows) * cols * channels, fill);
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(rows_) * cols_; }

  bool same_size(int rows, int cols) const { return rows_ == rows && cols_ == cols; }
  template <typename U>
  bool same_size(const Image<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  T& operator()(int r, int c, int ch = 0) { return data_[index(r, c, ch)]; }
  const T& operator()(int r, int c, int ch = 0) const { return data_[index(r, c, ch)]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  bool operator==(const Image& other) const = default;

 private:
  std::size_t index(int r, int c, int ch) const {
    return (static_cast<std::size_t>(r) * cols_ + c) * channels_ + ch;
  }

  int rows_ = 0;
  int cols_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using RgbImage = Image<std::uint8_t>;     // 3 channels
using DepthImage = Image<std::uint16_t>;  // raw depth units, see CameraIntrinsics::depth_scale
using LabelImage = Image<std::uint8_t>;   // 0 = background, k > 0 = object class k
using BinaryMask = Image<std::uint8_t>;   // values 0 or 1

// Binary mask of the pixels carrying `label`.
inline BinaryMask mask_for_label(const LabelImage& labels, int label) {
  BinaryMask out(labels.rows(), labels.cols());
  auto src = labels.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] == label ? 1 : 0;
  return out;
}

template <typename T>
std::size_t count_nonzero(const Image<T>& img) {
  std::size_t n = 0;
  for (const T& v : img.data()) n += v != T{} ? 1 : 0;
  return n;
}

}  // namespace pfpose
