#include "purekit/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "purekit/errors.hpp"

namespace purekit {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Tensor read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw_parse("cannot open PNG file: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw_runtime("libpng initialization failed");
  }
  std::vector<png_bytep> rows;
  std::vector<png_byte> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw_parse("malformed PNG file: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  size_t rowbytes = png_get_rowbytes(png, info);
  pixels.resize(rowbytes * h);
  rows.resize(h);
  for (png_uint_32 r = 0; r < h; ++r) rows[r] = pixels.data() + r * rowbytes;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor out({3, static_cast<int64_t>(h), static_cast<int64_t>(w)});
  for (png_uint_32 r = 0; r < h; ++r) {
    const png_byte* row = pixels.data() + r * rowbytes;
    for (png_uint_32 c = 0; c < w; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        out.at(ch, r, c) = row[3 * c + ch] / 255.0;
      }
    }
  }
  return out;
}

void write_png(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || (image.size(0) != 1 && image.size(0) != 3)) {
    throw_parameter("write_png expects a (1,H,W) or (3,H,W) tensor");
  }
  int64_t channels = image.size(0), h = image.size(1), w = image.size(2);

  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw_runtime("cannot open PNG file for writing: " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw_runtime("libpng initialization failed");
  }
  std::vector<png_byte> pixels(static_cast<size_t>(3 * h * w));
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw_runtime("PNG write failed: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);

  for (int64_t r = 0; r < h; ++r) {
    for (int64_t c = 0; c < w; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        double v = image.at(channels == 1 ? 0 : ch, r, c);
        v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        pixels[static_cast<size_t>(3 * (r * w + c) + ch)] =
            static_cast<png_byte>(v * 255.0 + 0.5);
      }
    }
    rows[static_cast<size_t>(r)] = pixels.data() + 3 * r * w;
  }
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace purekit
