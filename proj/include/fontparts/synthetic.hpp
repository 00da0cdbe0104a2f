#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fontparts/dataset.hpp"
#include "fontparts/image.hpp"

namespace fontparts::dataset {

enum class Feature { serif, jaggy_contour, rounded_corner, constant_stroke, varying_stroke };

const char* to_string(Feature f);

struct FeatureFlags {
  bool serif = false;
  bool jaggy_contour = false;
  bool rounded_corner = false;
  bool constant_stroke = true;
  bool varying_stroke = false;

  bool has(Feature f) const;
};

/// Deterministic map from feature flags to impression words.
struct LabelRule {
  std::vector<std::pair<Feature, std::vector<std::string>>> words_for_feature;
  /// Words attached when no feature rule fires, so every font carries a label.
  std::vector<std::string> fallback;

  /// serif→serif; jaggy→rough, grunge; rounded→soft; constant stroke→geometric; otherwise plain.
  static LabelRule standard();
  std::vector<std::string> apply(const FeatureFlags& flags) const;
};

struct SyntheticSpec {
  std::size_t n_fonts = 200;
  std::size_t glyphs_per_font = 10;
  int image_size = 64;
  /// Independent probability of each of serif / jaggy / rounded / constant stroke.
  double feature_probability = 0.3;
  LabelRule label_rule = LabelRule::standard();
};

struct SyntheticFont {
  std::string font_id;
  FeatureFlags flags;
  std::vector<std::string> words;
  std::vector<GlyphImage> glyphs;
};

/// Letters drawn by the renderer, in glyph order.
const std::string& synthetic_letters();

/// Renders one font; a pure function of (spec, seed, font_index).
SyntheticFont render_synthetic_font(const SyntheticSpec& spec, std::uint64_t seed, std::size_t font_index);

struct SyntheticDataset {
  std::filesystem::path manifest;
  std::filesystem::path truth;
  std::vector<SyntheticFont> fonts;
};

/// Writes images/<font>/NN_<letter>.pgm, manifest.tsv and truth.tsv under out_dir.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                    const std::filesystem::path& out_dir);

/// Reads truth.tsv back: font_id → flags.
std::map<std::string, FeatureFlags> read_truth(const std::filesystem::path& path);

}  // namespace fontparts::dataset
