#include "nfsem/image.hpp"

#include <png.h>

#include <bit>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace nfsem {

namespace {

static_assert(std::endian::native == std::endian::little,
              "float map IO assumes a little-endian host");

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

}  // namespace

void write_float_map(const std::string& path, const FloatMap& map) {
  nlohmann::json header = {{"magic", "nfmap"},
                           {"dtype", "f32"},
                           {"height", map.height()},
                           {"width", map.width()},
                           {"channels", map.channels()}};
  const std::string line = header.dump() + "\n";
  FilePtr f = open_file(path, "wb");
  if (std::fwrite(line.data(), 1, line.size(), f.get()) != line.size())
    throw std::runtime_error("short write: " + path);
  if (!map.empty() &&
      std::fwrite(map.data(), sizeof(float), map.size(), f.get()) != map.size())
    throw std::runtime_error("short write: " + path);
}

FloatMap read_float_map(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  std::string line;
  int ch;
  while ((ch = std::fgetc(f.get())) != EOF && ch != '\n') line.push_back(static_cast<char>(ch));
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || header.value("magic", "") != "nfmap" ||
      header.value("dtype", "") != "f32")
    throw std::runtime_error("not a float map: " + path);
  const int h = header.at("height").get<int>();
  const int w = header.at("width").get<int>();
  const int c = header.at("channels").get<int>();
  if (h <= 0 || w <= 0 || c <= 0) throw std::runtime_error("bad float map shape: " + path);
  FloatMap map(w, h, c);
  if (std::fread(map.data(), sizeof(float), map.size(), f.get()) != map.size())
    throw std::runtime_error("truncated float map: " + path);
  return map;
}

void write_gray_png(const std::string& path, const ByteImage& img) {
  if (img.channels() != 1) throw std::invalid_argument("write_gray_png: single channel expected");
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failed: " + path);
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()),
               static_cast<png_uint_32>(img.height()), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height(); ++y)
    png_write_row(png, const_cast<png_bytep>(img.data() + static_cast<std::size_t>(y) * img.width()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ByteImage read_gray_png(const std::string& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("libpng read failed: " + path);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  // Normalize any input to 8-bit grayscale.
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (png_get_color_type(png, info) & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray(png, 1, -1, -1);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  ByteImage img(w, h, 1);
  for (int y = 0; y < h; ++y)
    png_read_row(png, img.data() + static_cast<std::size_t>(y) * w, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

}  // namespace nfsem
