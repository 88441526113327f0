#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace alpr {

using Channel = Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 8-bit RGB image stored as three height x width planes.
struct RasterImage {
  std::array<Channel, 3> planes;

  static RasterImage filled(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  int width() const { return static_cast<int>(planes[0].cols()); }
  int height() const { return static_cast<int>(planes[0].rows()); }

  friend bool operator==(const RasterImage& a, const RasterImage& b) {
    for (int c = 0; c < 3; ++c) {
      if (a.planes[c].rows() != b.planes[c].rows() || a.planes[c].cols() != b.planes[c].cols())
        return false;
      if (!(a.planes[c] == b.planes[c]).all()) return false;
    }
    return true;
  }
};

/// Decodes PNG or JPEG (detected from the file signature) to RGB.
RasterImage read_image(const std::filesystem::path& path);
void write_png(const RasterImage& image, const std::filesystem::path& path);
/// Reads only the header; returns {width, height}.
std::array<int, 2> image_size(const std::filesystem::path& path);

}  // namespace alpr
