#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nfsem {

// Dense row-major image, channels interleaved.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : w_(width), h_(height), c_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const { return w_; }
  int height() const { return h_; }
  int channels() const { return c_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(w_) * h_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y, int ch = 0) { return data_[(static_cast<std::size_t>(y) * w_ + x) * c_ + ch]; }
  const T& at(int x, int y, int ch = 0) const {
    return data_[(static_cast<std::size_t>(y) * w_ + x) * c_ + ch];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  bool same_shape(const Image& o) const { return w_ == o.w_ && h_ == o.h_ && c_ == o.c_; }

 private:
  int w_ = 0, h_ = 0, c_ = 0;
  std::vector<T> data_;
};

using FloatMap = Image<float>;
using ByteImage = Image<std::uint8_t>;

// Raw float map format: one JSON header line
//   {"magic":"nfmap","dtype":"f32","height":H,"width":W,"channels":C}\n
// followed by H*W*C little-endian 32-bit floats.
void write_float_map(const std::string& path, const FloatMap& map);
FloatMap read_float_map(const std::string& path);

// 8-bit grayscale PNG.
void write_gray_png(const std::string& path, const ByteImage& img);
ByteImage read_gray_png(const std::string& path);

}  // namespace nfsem
