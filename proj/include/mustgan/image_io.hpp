#pragma once

#include <png.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mustgan/tensor.hpp"

namespace mustgan {

/// In-memory images are 3 x H x W floats in [-1, 1]; files store bytes in [0, 255].
inline float from_byte(std::uint8_t q) { return static_cast<float>(q) / 127.5f - 1.0f; }

inline std::uint8_t to_byte(float v) {
  const double q = std::round((static_cast<double>(v) + 1.0) * 127.5);
  return static_cast<std::uint8_t>(q < 0 ? 0 : (q > 255 ? 255 : q));
}

struct RawImage {
  int h = 0;
  int w = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> bytes;  // row-major, interleaved
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace detail

inline void write_png(const std::filesystem::path& path, const RawImage& img) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail("io_error", "cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail("io_error", "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("io_error", "libpng write failed for " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.w) * img.channels;
  for (int y = 0; y < img.h; ++y)
    png_write_row(png, const_cast<png_bytep>(img.bytes.data() + static_cast<std::size_t>(y) * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0 || std::ferror(fp.get())) fail("io_error", "write failed for " + path.string());
}

inline RawImage read_png(const std::filesystem::path& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail("missing_file", path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("io_error", "libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("malformed_png", path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) != 8 || (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB)) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("malformed_png", path.string() + ": expected 8-bit gray or RGB");
  }
  RawImage img;
  img.w = static_cast<int>(png_get_image_width(png, info));
  img.h = static_cast<int>(png_get_image_height(png, info));
  img.channels = color == PNG_COLOR_TYPE_GRAY ? 1 : 3;
  const std::size_t stride = static_cast<std::size_t>(img.w) * img.channels;
  img.bytes.resize(stride * static_cast<std::size_t>(img.h));
  for (int y = 0; y < img.h; ++y) png_read_row(png, img.bytes.data() + static_cast<std::size_t>(y) * stride, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline RawImage to_raw(const Tensor<float>& image) {
  if (image.channels() != 3) fail("shape_mismatch", "expected a 3-channel image");
  RawImage r{image.height(), image.width(), 3, {}};
  r.bytes.resize(static_cast<std::size_t>(r.h) * r.w * 3);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      for (int c = 0; c < 3; ++c)
        r.bytes[(static_cast<std::size_t>(y) * r.w + x) * 3 + c] = to_byte(image.at(c, y, x));
  return r;
}

inline Tensor<float> from_raw(const RawImage& r) {
  if (r.channels != 3) fail("malformed_png", "expected an RGB image");
  Tensor<float> img(3, r.h, r.w);
  for (int y = 0; y < r.h; ++y)
    for (int x = 0; x < r.w; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = from_byte(r.bytes[(static_cast<std::size_t>(y) * r.w + x) * 3 + c]);
  return img;
}

inline void save_image(const std::filesystem::path& path, const Tensor<float>& image) { write_png(path, to_raw(image)); }
inline Tensor<float> load_image(const std::filesystem::path& path) { return from_raw(read_png(path)); }

/// Horizontal strip of equally sized images separated by a `gap`-pixel white border.
inline Tensor<float> contact_sheet(const std::vector<Tensor<float>>& tiles, int gap = 2) {
  if (tiles.empty()) fail("invalid_argument", "contact sheet needs at least one tile");
  const int h = tiles[0].height(), w = tiles[0].width();
  const int n = static_cast<int>(tiles.size());
  Tensor<float> out(3, h, n * w + (n - 1) * gap, 1.0f);
  for (int i = 0; i < n; ++i) {
    if (tiles[static_cast<std::size_t>(i)].height() != h || tiles[static_cast<std::size_t>(i)].width() != w)
      fail("size_mismatch", "contact sheet tiles differ in size");
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.at(c, y, i * (w + gap) + x) = tiles[static_cast<std::size_t>(i)].at(c, y, x);
  }
  return out;
}

/// Heatmap channels collapsed by max into a gray-on-black preview image.
inline Tensor<float> pose_preview(const Tensor<float>& pose) {
  Tensor<float> out(3, pose.height(), pose.width(), -1.0f);
  for (int y = 0; y < pose.height(); ++y)
    for (int x = 0; x < pose.width(); ++x) {
      float m = 0;
      for (int c = 0; c < pose.channels(); ++c) m = std::max(m, pose.at(c, y, x));
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = 2.0f * std::min(m, 1.0f) - 1.0f;
    }
  return out;
}

}  // namespace mustgan
