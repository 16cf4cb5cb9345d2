#include "ronet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>

#include "ronet/errors.hpp"

namespace ronet {
namespace fs = std::filesystem;
namespace {

std::uint8_t to_byte(double v) {
  const double clipped = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(clipped * 255.0 + 0.5));
}

// Bit depth and color type from the IHDR chunk, which libpng's simplified
// reader would otherwise silently convert.
std::pair<int, int> png_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::array<unsigned char, 26> head{};
  in.read(reinterpret_cast<char*>(head.data()), head.size());
  if (in.gcount() != static_cast<std::streamsize>(head.size()) ||
      png_sig_cmp(head.data(), 0, 8) != 0) {
    throw IoError("'" + path.string() + "' is not a PNG file");
  }
  return {head[24], head[25]};
}

}  // namespace

Image load_png(const fs::path& path) {
  const auto [bit_depth, color_type] = png_header(path);
  if (bit_depth != 8 && !(color_type == PNG_COLOR_TYPE_PALETTE && bit_depth <= 8)) {
    throw IoError("'" + path.string() + "': unsupported bit depth " +
                  std::to_string(bit_depth) + " (8-bit PNG expected)");
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.string().c_str())) {
    throw IoError("'" + path.string() + "': " + png.message);
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw IoError("'" + path.string() + "': " + msg);
  }
  const std::size_t c = color ? 3 : 1;
  Image img(c, png.height, png.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t k = 0; k < c; ++k) {
        img.at(k, y, x) = buffer[(y * img.width + x) * c + k] / 255.0;
      }
    }
  }
  return img;
}

void save_png(const Image& img, const fs::path& path) {
  if (img.channels != 1 && img.channels != 3) {
    throw ArgumentError("save_png: 1 or 3 channels required, got " + img.shape_str());
  }
  std::vector<std::uint8_t> buffer(img.data.size());
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t k = 0; k < img.channels; ++k) {
        buffer[(y * img.width + x) * img.channels + k] = to_byte(img.at(k, y, x));
      }
    }
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("'" + path.string() + "': " + png.message);
  }
}

Image quantize_8bit(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = to_byte(v) / 255.0;
  return out;
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ronet
