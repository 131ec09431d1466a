#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <png.h>

#include "icascope/errors.hpp"
#include "icascope/topomap.hpp"

namespace icascope {

struct PngImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> rgb;  // rows*cols*3
};

namespace detail {
struct FileCloser {
  std::FILE* f = nullptr;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};
}  // namespace detail

inline void write_png_rgb8(const std::string& path, int rows, int cols,
                           const std::uint8_t* rgb) {
  detail::FileCloser file;
  file.f = std::fopen(path.c_str(), "wb");
  if (!file.f) throw IoError("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(rows));
  for (int r = 0; r < rows; ++r)
    row_ptrs[static_cast<std::size_t>(r)] =
        const_cast<png_bytep>(rgb + static_cast<std::size_t>(r) * cols * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed: " + path);
  }
  png_init_io(png, file.f);
  png_set_compression_level(png, 6);  // pin for byte-reproducible output
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline PngImage read_png_rgb8(const std::string& path) {
  detail::FileCloser file;
  file.f = std::fopen(path.c_str(), "rb");
  if (!file.f) throw IoError("cannot open: " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.f) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw ParseError("not a PNG file: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialization failed");
  }
  PngImage out;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("PNG read failed: " + path);
  }
  png_init_io(png, file.f);
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  out.cols = static_cast<int>(png_get_image_width(png, info));
  out.rows = static_cast<int>(png_get_image_height(png, info));
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("unsupported PNG layout: " + path);
  }
  out.rgb.resize(static_cast<std::size_t>(out.rows) * out.cols * 3);
  row_ptrs.resize(static_cast<std::size_t>(out.rows));
  for (int r = 0; r < out.rows; ++r)
    row_ptrs[static_cast<std::size_t>(r)] =
        out.rgb.data() + static_cast<std::size_t>(r) * out.cols * 3;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

inline void export_png(const Topoplot& t, const std::string& path) {
  write_png_rgb8(path, t.rows, t.cols, t.rgb.data());
}

}  // namespace icascope
