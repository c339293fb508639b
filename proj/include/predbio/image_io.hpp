#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "predbio/tensor.hpp"

namespace predbio {

/// 8-bit image with interleaved channels (row-major, HWC).
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> pixels;
};

/// Lossless PNG; 1 (gray) or 3 (RGB) channels.
void write_png(const std::filesystem::path& path, const Image8& image);
/// Gray, gray+alpha, RGB and RGBA inputs; alpha is dropped, palettes expanded.
Image8 read_png(const std::filesystem::path& path);

/// CHW tensor of shape (C, H, W) with values in [0, 1].
Tensor image_to_tensor(const Image8& image);
/// Values are clamped to [0, 1] and rounded to 8 bits.
Image8 tensor_to_image(std::span<const double> chw, std::size_t channels, std::size_t height,
                       std::size_t width);

}  // namespace predbio
