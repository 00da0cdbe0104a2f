#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fontparts/analysis.hpp"
#include "fontparts/dataset.hpp"
#include "fontparts/deepsets.hpp"
#include "fontparts/sift.hpp"
#include "fontparts/synthetic.hpp"

namespace fontparts {

struct PipelineConfig {
  // [general]
  std::uint64_t seed = 0;
  unsigned threads = 0;

  // [paths]
  /// Empty means the synthetic manifest under the work dir.
  std::filesystem::path manifest;
  std::filesystem::path work_dir = "work";
  /// Optional `font_id<TAB>split` file; empty means a seeded random split.
  std::filesystem::path split_file;

  // [synth]
  dataset::SyntheticSpec synth;

  // [dataset]
  std::size_t min_fonts = 100;
  dataset::SplitRatios split;

  sift::SiftParams sift;
  deepsets::TrainConfig train;
  deepsets::PredictConfig predict;

  // [codebook]
  int codebook_size = 64;
  std::size_t codebook_sample = 200000;
  int kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;

  // [analysis]
  int row_clusters = 8;
  int col_clusters = 8;
  int n_singular_vectors = 6;
  std::size_t peak_top_n = 6;
  double peak_min_value = 0.0;
  std::size_t neighbors = 5;
  analysis::SimilarityBasis similarity = analysis::SimilarityBasis::histogram;

  // [eval]
  std::size_t table_size = 20;

  /// Range checks; throws UsageError naming the key.
  void validate() const;
  /// Sets one `section.key` from text; unknown keys are rejected.
  void set(const std::string& dotted_key, const std::string& value);
  /// Canonical INI text of every key.
  std::string to_ini() const;
};

/// Defaults overlaid with the INI file (when given), then FONTPARTS_WORK_DIR.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& ini_text, const std::string& source = "config");

}  // namespace fontparts
