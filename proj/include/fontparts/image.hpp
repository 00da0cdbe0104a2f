#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fontparts {

/// 8-bit grayscale raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Single-precision raster used by the scale-space code.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  FloatImage() = default;
  FloatImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  /// Clamped access for border handling.
  float clamped(int x, int y) const;
  /// Bilinear sample with clamped borders.
  float sample(float x, float y) const;
};

/// Loads an 8-bit grayscale PNG or binary PGM (P5), chosen by content.
GrayImage read_gray_image(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);

/// Maps 0..255 to 0..1.
FloatImage to_float(const GrayImage& image);

/// Bilinear resize, pixel centers aligned (x_src = (x_dst + 0.5) * src/dst - 0.5).
FloatImage resize_bilinear(const FloatImage& src, int width, int height);

/// Enforces the 0=ink / 255=background convention: inverts the image when the
/// border pixels' median is darker than the median of the central region.
/// Returns true when an inversion happened.
bool normalize_polarity(GrayImage& image);

}  // namespace fontparts
