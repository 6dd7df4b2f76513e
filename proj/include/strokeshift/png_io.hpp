#pragma once

#include <filesystem>

#include "strokeshift/raster.hpp"

namespace strokeshift {

/// 8-bit grayscale PNG with value round(255 (1 - ink)): white paper, black ink.
void write_ink_png(const std::filesystem::path& path, const InkImage<double>& ink);

/// Inverse of write_ink_png (ink = 1 - value / 255). Color inputs are converted to gray.
InkImage<double> read_ink_png(const std::filesystem::path& path);

}  // namespace strokeshift
