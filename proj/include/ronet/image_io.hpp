#pragma once

#include <filesystem>
#include <vector>

#include "ronet/image.hpp"

namespace ronet {

// Reads an 8-bit gray or RGB PNG (palette images are expanded, alpha is
// dropped) into [0, 1]. Other bit depths raise IoError.
Image load_png(const std::filesystem::path& path);

// Clips to [0, 1] and quantizes round-half-up to 8 bits. One or three
// channels.
void save_png(const Image& img, const std::filesystem::path& path);

// The value save_png followed by load_png yields.
Image quantize_8bit(const Image& img);

// *.png files of `dir`, sorted by file name.
std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir);

}  // namespace ronet
