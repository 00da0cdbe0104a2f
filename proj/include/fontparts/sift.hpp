#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fontparts/dataset.hpp"
#include "fontparts/image.hpp"

namespace fontparts::sift {

inline constexpr int kDescriptorDim = 128;
inline constexpr int kOrientationBins = 36;

struct SiftParams {
  /// 0 selects min(4, floor(log2(min dim)) - 2) from the normalized image.
  int n_octaves = 0;
  int scales_per_octave = 3;
  double base_sigma = 1.6;
  /// Applied to |DoG| at the interpolated extremum, intensities in [0, 1].
  double contrast_threshold = 0.03;
  double edge_ratio = 10.0;
  bool upsample = true;
  /// Glyphs are rescaled to this height (aspect preserved) before extraction; 0 disables.
  int target_height = 128;
  /// Keypoints closer than this to the normalized image border are discarded.
  double border = 8.0;
};

struct Octave {
  std::vector<FloatImage> gaussians;  // s + 3 levels
  std::vector<FloatImage> dogs;       // s + 2 levels
};

struct ScaleSpace {
  std::vector<Octave> octaves;
  int scales_per_octave = 3;
  double base_sigma = 1.6;
  /// Octave-0 pixels per input pixel (2 when upsampled).
  double input_scale = 1.0;
  int input_width = 0;
  int input_height = 0;

  /// Input pixels per pixel of octave o.
  double octave_step(int o) const;
  /// Blur of gaussian level j of octave o in octave-0 pixels: base_sigma * 2^(o + j/s).
  double level_sigma(int o, double j) const;
};

/// Location, scale and orientation in input-image coordinates.
struct Keypoint {
  double x = 0;
  double y = 0;
  double sigma = 0;
  double orientation = 0;  // radians in [0, 2*pi), image axes (y down)
  int octave = 0;
  int level = 0;
  double level_offset = 0;  // sub-level refinement in [-0.5, 0.5]
  double response = 0;
};

using DescriptorValues = std::array<float, kDescriptorDim>;

struct Descriptor {
  DescriptorValues values{};
  Keypoint keypoint;
  std::uint16_t glyph_index = 0;
};

struct DescriptorSet {
  std::string font_id;
  std::vector<Descriptor> descriptors;
};

/// Separable Gaussian, kernel radius ceil(3 sigma), reflected borders.
FloatImage gaussian_blur(const FloatImage& image, double sigma);

int default_octaves(int width, int height);

ScaleSpace build_scale_space(const FloatImage& image, int n_octaves, int scales_per_octave, double base_sigma,
                             bool upsample = true);

std::vector<Keypoint> detect_keypoints(const ScaleSpace& ss, double contrast_threshold, double edge_ratio);

/// Smoothed 36-bin gradient orientation histogram around a keypoint.
std::array<double, kOrientationBins> orientation_histogram(const ScaleSpace& ss, const Keypoint& kp);

/// One copy of kp per histogram peak at or above 0.8 of the maximum.
std::vector<Keypoint> assign_orientations(const ScaleSpace& ss, const Keypoint& kp);

/// Unnormalized 4x4x8 gradient histogram; all zeros on a flat window.
std::array<double, kDescriptorDim> raw_descriptor(const ScaleSpace& ss, const Keypoint& kp);

/// Unit-normalize, clamp at 0.2, renormalize. nullopt for an all-zero input.
std::optional<DescriptorValues> normalize_descriptor(const std::array<double, kDescriptorDim>& raw);

/// nullopt signals a degenerate (flat) descriptor window.
std::optional<DescriptorValues> compute_descriptor(const ScaleSpace& ss, const Keypoint& kp);

/// Full build/detect/orient/describe pass on one image. Coordinates are in the
/// pixel frame of `image`; descriptors come back in raster order.
std::vector<Descriptor> extract_image(const GrayImage& image, const SiftParams& params);

/// Concatenates extract_image over the record's glyphs in glyph order.
DescriptorSet extract_font_descriptors(const dataset::FontRecord& record, const SiftParams& params);

}  // namespace fontparts::sift
