#include "fontparts/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <string>

#include "fontparts/binary_io.hpp"
#include "fontparts/common.hpp"

namespace fontparts {

float FloatImage::clamped(int x, int y) const {
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return at(x, y);
}

float FloatImage::sample(float x, float y) const {
  const float fx = std::floor(x);
  const float fy = std::floor(y);
  const int x0 = static_cast<int>(fx);
  const int y0 = static_cast<int>(fy);
  const float ax = x - fx;
  const float ay = y - fy;
  const float top = (1 - ax) * clamped(x0, y0) + ax * clamped(x0 + 1, y0);
  const float bottom = (1 - ax) * clamped(x0, y0 + 1) + ax * clamped(x0 + 1, y0 + 1);
  return (1 - ay) * top + ay * bottom;
}

namespace {

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      any = true;
      if (v > 1'000'000) break;
    }
    if (!any) throw DataError(path.string() + ": malformed PGM header");
    return v;
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  ++pos;  // single whitespace before raster
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) {
    throw DataError(path.string() + ": unsupported PGM dimensions or depth");
  }
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < pos + n) throw DataError(path.string() + ": truncated PGM raster");
  GrayImage img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(bytes[pos + i] * 255.0 / maxval));
  }
  return img;
}

GrayImage decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw DataError(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage img(static_cast<int>(image.width), static_cast<int>(image.height));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw DataError(path.string() + ": " + msg);
  }
  return img;
}

}  // namespace

GrayImage read_gray_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("image not found: " + path.string());
  const auto bytes = read_file_bytes(path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path);
  throw DataError(path.string() + ": not an 8-bit PNG or binary PGM");
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  write_file_bytes(path, out);
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  png_image desc;
  std::memset(&desc, 0, sizeof desc);
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(image.width);
  desc.height = static_cast<png_uint_32>(image.height);
  desc.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&desc, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    throw DataError(path.string() + ": " + desc.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&desc, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    throw DataError(path.string() + ": " + desc.message);
  }
  out.resize(size);
  write_file_bytes(path, out);
}

FloatImage to_float(const GrayImage& image) {
  FloatImage out(image.width, image.height);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) out.data[i] = image.pixels[i] / 255.0f;
  return out;
}

FloatImage resize_bilinear(const FloatImage& src, int width, int height) {
  FloatImage out(width, height);
  const float sx = static_cast<float>(src.width) / width;
  const float sy = static_cast<float>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const float fy = (y + 0.5f) * sy - 0.5f;
    for (int x = 0; x < width; ++x) {
      out.at(x, y) = src.sample((x + 0.5f) * sx - 0.5f, fy);
    }
  }
  return out;
}

bool normalize_polarity(GrayImage& image) {
  std::vector<std::uint8_t> border;
  std::vector<std::uint8_t> center;
  const int w = image.width;
  const int h = image.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x == 0 || y == 0 || x == w - 1 || y == h - 1) {
        border.push_back(image.at(x, y));
      } else if (x >= w / 4 && x < w - w / 4 && y >= h / 4 && y < h - h / 4) {
        center.push_back(image.at(x, y));
      }
    }
  }
  if (center.empty()) return false;
  auto median = [](std::vector<std::uint8_t>& v) {
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
  };
  if (median(border) >= median(center)) return false;
  for (auto& p : image.pixels) p = static_cast<std::uint8_t>(255 - p);
  return true;
}

}  // namespace fontparts
