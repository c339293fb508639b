#include "predbio/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "predbio/error.hpp"

namespace predbio {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw Error(Errc::io, "cannot open " + path.string());
  return f;
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw Error(Errc::invalid_argument, "write_png supports 1 or 3 channels");
  }
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw Error(Errc::shape_mismatch, "write_png: pixel buffer size mismatch");
  }
  auto file = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::io, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::io, "libpng write failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width),
               static_cast<png_uint_32>(image.height), 8,
               image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = image.width * image.channels;
  for (std::size_t y = 0; y < image.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image8 read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::io, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::io, "libpng read failed: " + path.string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto color_type = png_get_color_type(png, info);
  const auto bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  Image8 image;
  image.width = png_get_image_width(png, info);
  image.height = png_get_image_height(png, info);
  image.channels = png_get_channels(png, info);
  image.pixels.resize(image.width * image.height * image.channels);
  std::vector<png_bytep> rows(image.height);
  for (std::size_t y = 0; y < image.height; ++y) {
    rows[y] = image.pixels.data() + y * image.width * image.channels;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

Tensor image_to_tensor(const Image8& image) {
  Tensor t({image.channels, image.height, image.width});
  const std::size_t plane = image.height * image.width;
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < image.channels; ++c) {
      t[c * plane + p] = image.pixels[p * image.channels + c] / 255.0;
    }
  }
  return t;
}

Image8 tensor_to_image(std::span<const double> chw, std::size_t channels, std::size_t height,
                       std::size_t width) {
  if (chw.size() != channels * height * width) {
    throw Error(Errc::shape_mismatch, "tensor_to_image: size mismatch");
  }
  Image8 image{width, height, channels, std::vector<std::uint8_t>(chw.size())};
  const std::size_t plane = height * width;
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double v = std::clamp(chw[c * plane + p], 0.0, 1.0);
      image.pixels[p * channels + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return image;
}

}  // namespace predbio
