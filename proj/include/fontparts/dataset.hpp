#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fontparts/image.hpp"

namespace fontparts::dataset {

/// One glyph raster of a font. Pixels follow the 0=ink, 255=background convention.
struct GlyphImage {
  std::string font_id;
  char32_t letter = 0;
  GrayImage image;
};

/// Impression words indexed 0..K-1 in lexicographic order.
class ImpressionVocabulary {
public:
  ImpressionVocabulary() = default;
  /// Builds from word→frequency pairs; the map order is the index order.
  explicit ImpressionVocabulary(const std::map<std::string, std::size_t>& frequencies);

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t k) const { return words_.at(k); }
  std::size_t frequency(std::size_t k) const { return frequency_.at(k); }
  std::optional<std::size_t> index_of(const std::string& word) const;

private:
  std::vector<std::string> words_;
  std::vector<std::size_t> frequency_;
  std::map<std::string, std::size_t> index_;
};

enum class Split { unassigned, train, val, test };

const char* to_string(Split s);
Split parse_split(const std::string& s);

struct FontRecord {
  std::string font_id;
  std::string name;
  /// Glyph source column as written in the manifest.
  std::string glyph_source;
  /// Image files backing the glyphs, in load order.
  std::vector<std::filesystem::path> glyph_paths;
  /// Loaded glyphs; empty until load_glyphs() runs.
  std::vector<GlyphImage> glyphs;
  /// Sorted, unique vocabulary indices.
  std::vector<std::size_t> impressions;
  Split split = Split::unassigned;
};

struct Dataset {
  std::vector<FontRecord> records;
  ImpressionVocabulary vocabulary;
};

/// Reads the manifest and resolves glyph file lists without decoding images.
/// Relative glyph sources resolve against the manifest's directory.
Dataset parse_manifest(const std::filesystem::path& path);

/// Decodes every glyph of one record and normalizes ink polarity.
void load_glyphs(FontRecord& record);

/// parse_manifest followed by load_glyphs for every record.
Dataset load_manifest(const std::filesystem::path& path);

/// Drops words attached to fewer than min_fonts fonts and fonts left without words.
Dataset filter_vocabulary(const Dataset& input, std::size_t min_fonts);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Seeded shuffle then contiguous assignment. Each split receives at least one font.
std::vector<FontRecord> split_records(std::vector<FontRecord> records, const SplitRatios& ratios,
                                      std::uint64_t seed);

/// Applies `font_id<TAB>{train|val|test}` lines; every record must be listed.
std::vector<FontRecord> apply_split_file(std::vector<FontRecord> records, const std::filesystem::path& path);

using LabelVector = std::vector<double>;

LabelVector to_multi_hot(const FontRecord& record, std::size_t num_labels);

}  // namespace fontparts::dataset
