#include "fontparts/sift.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fontparts/common.hpp"

namespace fontparts::sift {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kAssumedInputBlur = 0.5;
constexpr int kMaxRefineSteps = 5;
constexpr double kOrientationPeakRatio = 0.8;
constexpr double kOrientationWindowFactor = 1.5;
constexpr double kDescriptorMagnification = 3.0;
constexpr double kDescriptorClamp = 0.2;

int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

FloatImage downsample(const FloatImage& src) {
  FloatImage out(src.width / 2, src.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.at(x, y) = 0.25f * (src.at(2 * x, 2 * y) + src.at(2 * x + 1, 2 * y) + src.at(2 * x, 2 * y + 1) +
                              src.at(2 * x + 1, 2 * y + 1));
    }
  }
  return out;
}

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  if (a >= kTwoPi) a = 0;
  return a;
}

/// Keypoint position in the pixel grid of its octave.
struct OctavePoint {
  double x;
  double y;
  double sigma;  // in octave pixels
  int octave;
  int level;
};

OctavePoint to_octave(const ScaleSpace& ss, const Keypoint& kp) {
  const double step = ss.octave_step(kp.octave);
  return {(kp.x + 0.5) / step - 0.5, (kp.y + 0.5) / step - 0.5, kp.sigma / step, kp.octave,
          std::clamp(kp.level, 0, static_cast<int>(ss.octaves[kp.octave].gaussians.size()) - 1)};
}

}  // namespace

double ScaleSpace::octave_step(int o) const { return std::ldexp(1.0, o) / input_scale; }

double ScaleSpace::level_sigma(int o, double j) const {
  return base_sigma * std::pow(2.0, o + j / scales_per_octave);
}

FloatImage gaussian_blur(const FloatImage& image, double sigma) {
  if (sigma <= 0) return image;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = image.width;
  const int h = image.height;

  FloatImage tmp(w, h);
  std::vector<float> line(static_cast<std::size_t>(w + 2 * r));
  for (int y = 0; y < h; ++y) {
    for (int i = -r; i < w + r; ++i) line[i + r] = image.at(reflect(i, w), y);
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int t = 0; t <= 2 * r; ++t) acc += k[t] * line[x + t];
      tmp.at(x, y) = static_cast<float>(acc);
    }
  }
  FloatImage out(w, h);
  std::vector<float> column(static_cast<std::size_t>(h + 2 * r));
  for (int x = 0; x < w; ++x) {
    for (int i = -r; i < h + r; ++i) column[i + r] = tmp.at(x, reflect(i, h));
    for (int y = 0; y < h; ++y) {
      double acc = 0;
      for (int t = 0; t <= 2 * r; ++t) acc += k[t] * column[y + t];
      out.at(x, y) = static_cast<float>(acc);
    }
  }
  return out;
}

int default_octaves(int width, int height) {
  const int min_dim = std::min(width, height);
  if (min_dim < 1) return 1;
  const int by_size = static_cast<int>(std::floor(std::log2(static_cast<double>(min_dim)))) - 2;
  return std::max(1, std::min(4, by_size));
}

ScaleSpace build_scale_space(const FloatImage& image, int n_octaves, int scales_per_octave, double base_sigma,
                             bool upsample) {
  if (scales_per_octave < 2) throw UsageError("scales_per_octave must be at least 2");
  if (n_octaves < 1) throw UsageError("n_octaves must be at least 1");
  if (base_sigma <= 0) throw UsageError("base_sigma must be positive");

  ScaleSpace ss;
  ss.scales_per_octave = scales_per_octave;
  ss.base_sigma = base_sigma;
  ss.input_scale = upsample ? 2.0 : 1.0;
  ss.input_width = image.width;
  ss.input_height = image.height;

  FloatImage base = upsample ? resize_bilinear(image, image.width * 2, image.height * 2) : image;
  if (std::min(base.width, base.height) < 16) {
    throw DataError("image too small for scale space: " + std::to_string(image.width) + "x" +
                    std::to_string(image.height));
  }
  const double prior = kAssumedInputBlur * ss.input_scale;
  base = gaussian_blur(base, std::sqrt(std::max(base_sigma * base_sigma - prior * prior, 0.01)));

  const int s = scales_per_octave;
  std::vector<double> increments(s + 3, 0.0);
  for (int j = 1; j < s + 3; ++j) {
    const double prev = base_sigma * std::pow(2.0, (j - 1.0) / s);
    const double cur = base_sigma * std::pow(2.0, static_cast<double>(j) / s);
    increments[j] = std::sqrt(cur * cur - prev * prev);
  }

  for (int o = 0; o < n_octaves; ++o) {
    if (o > 0) {
      if (std::min(base.width, base.height) < 16) break;
      base = downsample(ss.octaves.back().gaussians[s]);
    }
    Octave oct;
    oct.gaussians.reserve(s + 3);
    oct.gaussians.push_back(base);
    for (int j = 1; j < s + 3; ++j) oct.gaussians.push_back(gaussian_blur(oct.gaussians.back(), increments[j]));
    oct.dogs.reserve(s + 2);
    for (int j = 0; j < s + 2; ++j) {
      FloatImage d(base.width, base.height);
      const auto& lo = oct.gaussians[j].data;
      const auto& hi = oct.gaussians[j + 1].data;
      for (std::size_t i = 0; i < d.data.size(); ++i) d.data[i] = hi[i] - lo[i];
      oct.dogs.push_back(std::move(d));
    }
    ss.octaves.push_back(std::move(oct));
    base = ss.octaves.back().gaussians[s];
  }
  return ss;
}

namespace {

bool is_extremum(const std::vector<FloatImage>& dogs, int j, int x, int y) {
  const float v = dogs[j].at(x, y);
  const bool is_max = v > 0;
  for (int dj = -1; dj <= 1; ++dj) {
    const FloatImage& img = dogs[j + dj];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dj == 0 && dx == 0 && dy == 0) continue;
        const float n = img.at(x + dx, y + dy);
        if (is_max ? n > v : n < v) return false;
      }
    }
  }
  return true;
}

struct Derivatives {
  Eigen::Vector3d gradient;
  Eigen::Matrix3d hessian;
};

Derivatives derivatives(const std::vector<FloatImage>& dogs, int j, int x, int y) {
  const auto D = [&](int dj, int dx, int dy) { return static_cast<double>(dogs[j + dj].at(x + dx, y + dy)); };
  const double v = D(0, 0, 0);
  Derivatives d;
  d.gradient << 0.5 * (D(0, 1, 0) - D(0, -1, 0)), 0.5 * (D(0, 0, 1) - D(0, 0, -1)), 0.5 * (D(1, 0, 0) - D(-1, 0, 0));
  const double dxx = D(0, 1, 0) + D(0, -1, 0) - 2 * v;
  const double dyy = D(0, 0, 1) + D(0, 0, -1) - 2 * v;
  const double dss = D(1, 0, 0) + D(-1, 0, 0) - 2 * v;
  const double dxy = 0.25 * (D(0, 1, 1) - D(0, -1, 1) - D(0, 1, -1) + D(0, -1, -1));
  const double dxs = 0.25 * (D(1, 1, 0) - D(1, -1, 0) - D(-1, 1, 0) + D(-1, -1, 0));
  const double dys = 0.25 * (D(1, 0, 1) - D(1, 0, -1) - D(-1, 0, 1) + D(-1, 0, -1));
  d.hessian << dxx, dxy, dxs, dxy, dyy, dys, dxs, dys, dss;
  return d;
}

std::optional<Keypoint> refine(const ScaleSpace& ss, int o, int j, int x, int y, double contrast_threshold,
                               double edge_ratio) {
  const auto& dogs = ss.octaves[o].dogs;
  const int s = ss.scales_per_octave;
  const int w = dogs[0].width;
  const int h = dogs[0].height;

  Eigen::Vector3d offset;
  Derivatives d;
  bool converged = false;
  for (int step = 0; step < kMaxRefineSteps; ++step) {
    d = derivatives(dogs, j, x, y);
    const double det = d.hessian.determinant();
    if (!std::isfinite(det) || std::abs(det) < 1e-18) return std::nullopt;
    offset = -d.hessian.partialPivLu().solve(d.gradient);
    if (!offset.allFinite()) return std::nullopt;
    if (offset.cwiseAbs().maxCoeff() < 0.5) {
      converged = true;
      break;
    }
    if (offset.cwiseAbs().maxCoeff() > 1e6) return std::nullopt;
    x += static_cast<int>(std::lround(offset.x()));
    y += static_cast<int>(std::lround(offset.y()));
    j += static_cast<int>(std::lround(offset.z()));
    if (j < 1 || j > s || x < 1 || x > w - 2 || y < 1 || y > h - 2) return std::nullopt;
  }
  if (!converged) return std::nullopt;

  const double value = dogs[j].at(x, y) + 0.5 * d.gradient.dot(offset);
  if (!(std::abs(value) >= contrast_threshold)) return std::nullopt;

  const double dxx = d.hessian(0, 0);
  const double dyy = d.hessian(1, 1);
  const double dxy = d.hessian(0, 1);
  const double trace = dxx + dyy;
  const double det2 = dxx * dyy - dxy * dxy;
  if (det2 <= 0 || trace * trace * edge_ratio >= (edge_ratio + 1) * (edge_ratio + 1) * det2) return std::nullopt;

  const double step = ss.octave_step(o);
  Keypoint kp;
  kp.x = (x + offset.x() + 0.5) * step - 0.5;
  kp.y = (y + offset.y() + 0.5) * step - 0.5;
  kp.octave = o;
  kp.level = j;
  kp.level_offset = offset.z();
  kp.sigma = ss.level_sigma(o, j + offset.z()) / ss.input_scale;
  kp.response = value;
  if (kp.x < 0 || kp.y < 0 || kp.x > ss.input_width - 1 || kp.y > ss.input_height - 1) return std::nullopt;
  return kp;
}

}  // namespace

std::vector<Keypoint> detect_keypoints(const ScaleSpace& ss, double contrast_threshold, double edge_ratio) {
  std::vector<Keypoint> found;
  if (!(contrast_threshold < std::numeric_limits<double>::infinity())) return found;
  const int s = ss.scales_per_octave;
  const float prefilter = static_cast<float>(0.5 * contrast_threshold / s);
  for (int o = 0; o < static_cast<int>(ss.octaves.size()); ++o) {
    const auto& dogs = ss.octaves[o].dogs;
    const int w = dogs[0].width;
    const int h = dogs[0].height;
    for (int j = 1; j <= s; ++j) {
      for (int y = 1; y < h - 1; ++y) {
        for (int x = 1; x < w - 1; ++x) {
          const float v = dogs[j].at(x, y);
          if (std::abs(v) <= prefilter || !is_extremum(dogs, j, x, y)) continue;
          if (auto kp = refine(ss, o, j, x, y, contrast_threshold, edge_ratio)) found.push_back(*kp);
        }
      }
    }
  }

  // Merge refinements that landed on the same location and scale.
  std::stable_sort(found.begin(), found.end(),
                   [](const Keypoint& a, const Keypoint& b) { return std::abs(a.response) > std::abs(b.response); });
  std::vector<Keypoint> kept;
  for (const auto& kp : found) {
    bool duplicate = false;
    for (const auto& k : kept) {
      if (std::hypot(k.x - kp.x, k.y - kp.y) <= 0.5 && std::abs(std::log2(k.sigma / kp.sigma)) <= 0.05) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(kp);
  }
  std::sort(kept.begin(), kept.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.y != b.y) return a.y < b.y;
    if (a.x != b.x) return a.x < b.x;
    return a.sigma < b.sigma;
  });
  return kept;
}

std::array<double, kOrientationBins> orientation_histogram(const ScaleSpace& ss, const Keypoint& kp) {
  std::array<double, kOrientationBins> hist{};
  const OctavePoint p = to_octave(ss, kp);
  const FloatImage& img = ss.octaves[p.octave].gaussians[p.level];
  const double window_sigma = kOrientationWindowFactor * p.sigma;
  const int radius = static_cast<int>(std::lround(3.0 * window_sigma));
  const int cx = static_cast<int>(std::lround(p.x));
  const int cy = static_cast<int>(std::lround(p.y));
  const double denom = 2.0 * window_sigma * window_sigma;

  for (int dy = -radius; dy <= radius; ++dy) {
    const int y = cy + dy;
    if (y < 1 || y > img.height - 2) continue;
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = cx + dx;
      if (x < 1 || x > img.width - 2) continue;
      const double gx = 0.5 * (img.at(x + 1, y) - img.at(x - 1, y));
      const double gy = 0.5 * (img.at(x, y + 1) - img.at(x, y - 1));
      const double mag = std::hypot(gx, gy);
      if (mag == 0) continue;
      const double ox = x - p.x;
      const double oy = y - p.y;
      const double weight = std::exp(-(ox * ox + oy * oy) / denom);
      const double angle = wrap_angle(std::atan2(gy, gx));
      const int bin = static_cast<int>(std::lround(angle * kOrientationBins / kTwoPi)) % kOrientationBins;
      hist[bin] += weight * mag;
    }
  }

  std::array<double, kOrientationBins> smooth{};
  for (int i = 0; i < kOrientationBins; ++i) {
    const auto at = [&](int k) { return hist[(k + kOrientationBins) % kOrientationBins]; };
    smooth[i] = (at(i - 2) + at(i + 2) + 4 * (at(i - 1) + at(i + 1)) + 6 * at(i)) / 16.0;
  }
  return smooth;
}

std::vector<Keypoint> assign_orientations(const ScaleSpace& ss, const Keypoint& kp) {
  std::vector<Keypoint> out;
  const auto hist = orientation_histogram(ss, kp);
  const double peak = *std::max_element(hist.begin(), hist.end());
  if (!(peak > 0)) return out;
  for (int i = 0; i < kOrientationBins; ++i) {
    const double l = hist[(i + kOrientationBins - 1) % kOrientationBins];
    const double c = hist[i];
    const double r = hist[(i + 1) % kOrientationBins];
    if (c <= l || c <= r || c < kOrientationPeakRatio * peak) continue;
    const double curvature = l - 2 * c + r;
    const double shift = curvature != 0 ? 0.5 * (l - r) / curvature : 0.0;
    Keypoint copy = kp;
    copy.orientation = wrap_angle((i + shift) * kTwoPi / kOrientationBins);
    out.push_back(copy);
  }
  return out;
}

std::array<double, kDescriptorDim> raw_descriptor(const ScaleSpace& ss, const Keypoint& kp) {
  std::array<double, kDescriptorDim> hist{};
  const OctavePoint p = to_octave(ss, kp);
  const FloatImage& img = ss.octaves[p.octave].gaussians[p.level];
  const double spacing = kDescriptorMagnification * p.sigma / 4.0;
  const double c = std::cos(kp.orientation);
  const double s = std::sin(kp.orientation);
  constexpr double kSpatialSigma = 8.0;  // half the 16-sample window

  for (int v = 0; v < 16; ++v) {
    for (int u = 0; u < 16; ++u) {
      const double lx = (u - 7.5) * spacing;
      const double ly = (v - 7.5) * spacing;
      const double x = p.x + c * lx - s * ly;
      const double y = p.y + s * lx + c * ly;
      if (x < 1 || y < 1 || x > img.width - 2 || y > img.height - 2) continue;
      const float fx = static_cast<float>(x);
      const float fy = static_cast<float>(y);
      const double gx = 0.5 * (img.sample(fx + 1, fy) - img.sample(fx - 1, fy));
      const double gy = 0.5 * (img.sample(fx, fy + 1) - img.sample(fx, fy - 1));
      // Gradient in the keypoint frame.
      const double rx = c * gx + s * gy;
      const double ry = -s * gx + c * gy;
      const double mag = std::hypot(rx, ry);
      if (mag == 0) continue;
      const double weight = std::exp(-((u - 7.5) * (u - 7.5) + (v - 7.5) * (v - 7.5)) / (2 * kSpatialSigma * kSpatialSigma));
      const double ob = wrap_angle(std::atan2(ry, rx)) * 8.0 / kTwoPi;
      const double cxf = (u + 0.5) / 4.0 - 0.5;
      const double cyf = (v + 0.5) / 4.0 - 0.5;
      const int x0 = static_cast<int>(std::floor(cxf));
      const int y0 = static_cast<int>(std::floor(cyf));
      const int o0 = static_cast<int>(std::floor(ob));
      const double ax = cxf - x0;
      const double ay = cyf - y0;
      const double ao = ob - o0;
      for (int dy = 0; dy <= 1; ++dy) {
        const int cy = y0 + dy;
        if (cy < 0 || cy > 3) continue;
        const double wy = dy ? ay : 1 - ay;
        for (int dx = 0; dx <= 1; ++dx) {
          const int cx = x0 + dx;
          if (cx < 0 || cx > 3) continue;
          const double wx = dx ? ax : 1 - ax;
          for (int d_o = 0; d_o <= 1; ++d_o) {
            const int ob_i = (o0 + d_o) % 8;
            const double wo = d_o ? ao : 1 - ao;
            hist[(cy * 4 + cx) * 8 + ob_i] += weight * mag * wx * wy * wo;
          }
        }
      }
    }
  }
  return hist;
}

std::optional<DescriptorValues> normalize_descriptor(const std::array<double, kDescriptorDim>& raw) {
  double norm = 0;
  for (double v : raw) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0) || !std::isfinite(norm)) return std::nullopt;
  std::array<double, kDescriptorDim> clamped;
  double norm2 = 0;
  for (int i = 0; i < kDescriptorDim; ++i) {
    clamped[i] = std::min(raw[i] / norm, kDescriptorClamp);
    norm2 += clamped[i] * clamped[i];
  }
  norm2 = std::sqrt(norm2);
  DescriptorValues out;
  for (int i = 0; i < kDescriptorDim; ++i) out[i] = static_cast<float>(clamped[i] / norm2);
  return out;
}

std::optional<DescriptorValues> compute_descriptor(const ScaleSpace& ss, const Keypoint& kp) {
  return normalize_descriptor(raw_descriptor(ss, kp));
}

std::vector<Descriptor> extract_image(const GrayImage& image, const SiftParams& params) {
  FloatImage input = to_float(image);
  int width = image.width;
  int height = image.height;
  if (params.target_height > 0 && height != params.target_height) {
    height = params.target_height;
    width = std::max(1, static_cast<int>(std::lround(static_cast<double>(image.width) * height / image.height)));
    input = resize_bilinear(input, width, height);
  }
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;

  const int octaves = params.n_octaves > 0 ? params.n_octaves : default_octaves(width, height);
  const ScaleSpace ss =
      build_scale_space(input, octaves, params.scales_per_octave, params.base_sigma, params.upsample);

  std::vector<Descriptor> out;
  for (const auto& kp : detect_keypoints(ss, params.contrast_threshold, params.edge_ratio)) {
    if (kp.x < params.border || kp.y < params.border || kp.x > width - 1 - params.border ||
        kp.y > height - 1 - params.border) {
      continue;
    }
    for (const auto& oriented : assign_orientations(ss, kp)) {
      auto values = compute_descriptor(ss, oriented);
      if (!values) continue;
      Descriptor d;
      d.values = *values;
      d.keypoint = oriented;
      d.keypoint.x = (oriented.x + 0.5) * sx - 0.5;
      d.keypoint.y = (oriented.y + 0.5) * sy - 0.5;
      d.keypoint.sigma = oriented.sigma * sy;
      out.push_back(d);
    }
  }
  return out;
}

DescriptorSet extract_font_descriptors(const dataset::FontRecord& record, const SiftParams& params) {
  if (record.glyphs.empty()) throw DataError("font " + record.font_id + " has no loaded glyphs");
  DescriptorSet set;
  set.font_id = record.font_id;
  for (std::size_t g = 0; g < record.glyphs.size(); ++g) {
    auto descriptors = extract_image(record.glyphs[g].image, params);
    for (auto& d : descriptors) {
      d.glyph_index = static_cast<std::uint16_t>(g);
      set.descriptors.push_back(d);
    }
  }
  return set;
}

}  // namespace fontparts::sift
