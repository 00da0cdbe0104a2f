#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "fontparts/image.hpp"
#include "fontparts/sift.hpp"

namespace testing {

/// Lossless 90 degree turn: (x, y) -> (h - 1 - y, x). Directions gain +90 degrees (y down).
inline fontparts::GrayImage rotate90(const fontparts::GrayImage& img) {
  fontparts::GrayImage out(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) out.at(img.height - 1 - y, x) = img.at(x, y);
  return out;
}

inline double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2 * std::numbers::pi);
  if (d > std::numbers::pi) d -= 2 * std::numbers::pi;
  if (d < -std::numbers::pi) d += 2 * std::numbers::pi;
  return std::abs(d);
}

inline double descriptor_distance(const fontparts::sift::Descriptor& a, const fontparts::sift::Descriptor& b) {
  double s = 0;
  for (int i = 0; i < fontparts::sift::kDescriptorDim; ++i) {
    const double d = static_cast<double>(a.values[i]) - b.values[i];
    s += d * d;
  }
  return std::sqrt(s);
}

struct RotationMatch {
  std::size_t original = 0;
  std::size_t rotated = 0;
  std::size_t matched = 0;
  double max_descriptor_distance = 0;
  double max_orientation_error = 0;  // radians, against the expected +90 degrees
  std::vector<double> distances;
};

/// Greedy bijective matching of keypoints after remapping the originals into the rotated frame:
/// location within tol_px, scale within tol_scale (relative), orientation within tol_angle of +90 degrees.
inline RotationMatch match_rotated(const std::vector<fontparts::sift::Descriptor>& original,
                                   const std::vector<fontparts::sift::Descriptor>& rotated, int height,
                                   double tol_px = 3.0, double tol_scale = 0.1,
                                   double tol_angle = 5.0 * std::numbers::pi / 180.0) {
  RotationMatch m;
  m.original = original.size();
  m.rotated = rotated.size();
  std::vector<char> taken(rotated.size(), 0);
  for (const auto& a : original) {
    const double ex = height - 1 - a.keypoint.y;
    const double ey = a.keypoint.x;
    const double eo = a.keypoint.orientation + std::numbers::pi / 2;
    double best = 1e300;
    std::size_t best_j = rotated.size();
    for (std::size_t j = 0; j < rotated.size(); ++j) {
      if (taken[j]) continue;
      const auto& b = rotated[j].keypoint;
      const double dist = std::hypot(b.x - ex, b.y - ey);
      if (dist > tol_px) continue;
      if (std::abs(b.sigma - a.keypoint.sigma) > tol_scale * a.keypoint.sigma) continue;
      const double da = angle_diff(b.orientation, eo);
      if (da > tol_angle) continue;
      const double score = dist + da;
      if (score < best) {
        best = score;
        best_j = j;
      }
    }
    if (best_j == rotated.size()) continue;
    taken[best_j] = 1;
    ++m.matched;
    const double d = descriptor_distance(a, rotated[best_j]);
    m.distances.push_back(d);
    m.max_descriptor_distance = std::max(m.max_descriptor_distance, d);
    m.max_orientation_error = std::max(m.max_orientation_error, angle_diff(rotated[best_j].keypoint.orientation, eo));
  }
  return m;
}

}  // namespace testing
