#include "strokeshift/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace strokeshift {

void write_ink_png(const std::filesystem::path& path, const InkImage<double>& ink) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(ink.cols());
  image.height = static_cast<png_uint_32>(ink.rows());
  image.format = PNG_FORMAT_GRAY;

  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(ink.size()));
  for (Eigen::Index r = 0; r < ink.rows(); ++r) {
    for (Eigen::Index c = 0; c < ink.cols(); ++c) {
      const double paper = std::clamp(1.0 - ink(r, c), 0.0, 1.0);
      buffer[static_cast<std::size_t>(r * ink.cols() + c)] =
          static_cast<std::uint8_t>(std::lround(255.0 * paper));
    }
  }
  if (png_image_write_to_file(&image, path.string().c_str(), 0, buffer.data(), 0, nullptr) == 0) {
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + image.message);
  }
}

InkImage<double> read_ink_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.string().c_str()) == 0) {
    throw std::runtime_error("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr) == 0) {
    throw std::runtime_error("cannot decode PNG " + path.string() + ": " + image.message);
  }
  InkImage<double> ink(image.height, image.width);
  for (Eigen::Index r = 0; r < ink.rows(); ++r) {
    for (Eigen::Index c = 0; c < ink.cols(); ++c) {
      ink(r, c) = 1.0 - buffer[static_cast<std::size_t>(r * ink.cols() + c)] / 255.0;
    }
  }
  return ink;
}

}  // namespace strokeshift
