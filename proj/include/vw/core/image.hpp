#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vw/core/types.hpp"

namespace vw {

/// Interleaved 8-bit RGB image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  Image() = default;
  Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, 0) {}

  std::uint8_t* at(int x, int y) { return &pixels[(static_cast<size_t>(y) * width + x) * 3]; }
  const std::uint8_t* at(int x, int y) const {
    return &pixels[(static_cast<size_t>(y) * width + x) * 3];
  }
  bool operator==(const Image&) const = default;
};

void write_png(const std::filesystem::path& path, const Image& image);
Image read_png(const std::filesystem::path& path);

/// Pixels as a (H*W) x 3 matrix scaled to [-1, 1].
Matrix image_to_matrix(const Image& image);
/// Inverse of image_to_matrix; values are clamped and rounded.
Image matrix_to_image(const Matrix& m, int width, int height);

}  // namespace vw
