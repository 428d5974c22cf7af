#include "vw/core/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "vw/core/error.hpp"

namespace vw {

void write_png(const std::filesystem::path& path, const Image& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, image.pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIo, "png write failed for " + path.string() + ": " + png.message);
  }
}

Image read_png(const std::filesystem::path& path) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw Error(ErrorCode::kIo, "png read failed for " + path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image image(static_cast<int>(png.width), static_cast<int>(png.height));
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(ErrorCode::kIo, "png decode failed for " + path.string() + ": " + png.message);
  }
  return image;
}

Matrix image_to_matrix(const Image& image) {
  Matrix m(static_cast<Eigen::Index>(image.width) * image.height, 3);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (int c = 0; c < 3; ++c) m(i, c) = image.pixels[i * 3 + c] / 127.5 - 1.0;
  }
  return m;
}

Image matrix_to_image(const Matrix& m, int width, int height) {
  if (m.rows() != static_cast<Eigen::Index>(width) * height || m.cols() != 3) {
    throw Error(ErrorCode::kDimensionMismatch, "matrix_to_image: shape mismatch");
  }
  Image image(width, height);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp((m(i, c) + 1.0) * 127.5, 0.0, 255.0);
      image.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return image;
}

}  // namespace vw
