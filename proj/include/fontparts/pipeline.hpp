#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "fontparts/config.hpp"
#include "fontparts/dataset.hpp"
#include "fontparts/sift.hpp"

namespace fontparts::pipeline {

/// Diagnostics go here (default std::cerr); nullptr silences them.
void set_log_stream(std::ostream* out);
void log(const std::string& line);

/// Files under the work directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path synth_dir() const { return root / "synth"; }
  std::filesystem::path synth_manifest() const { return synth_dir() / "manifest.tsv"; }
  std::filesystem::path synth_truth() const { return synth_dir() / "truth.tsv"; }
  std::filesystem::path cache_dir() const { return root / "cache"; }
  std::filesystem::path cache_file(const std::string& font_id) const { return cache_dir() / (font_id + ".gidx"); }
  std::filesystem::path cache_params() const { return cache_dir() / "sift_params.ini"; }
  std::filesystem::path fonts_table() const { return root / "dataset" / "fonts.tsv"; }
  std::filesystem::path vocabulary_table() const { return root / "dataset" / "vocabulary.tsv"; }
  std::filesystem::path extract_log() const { return root / "dataset" / "extract_failures.tsv"; }
  std::filesystem::path checkpoint() const { return root / "model" / "checkpoint.gimp"; }
  std::filesystem::path train_log() const { return root / "model" / "train_log.csv"; }
  std::filesystem::path train_state() const { return root / "model" / "train_state.bin"; }
  std::filesystem::path codebook() const { return root / "codebook" / "codebook.gcbk"; }
  std::filesystem::path kmeans_log() const { return root / "codebook" / "kmeans_log.csv"; }
  std::filesystem::path analysis_dir() const { return root / "analysis"; }
  std::filesystem::path font_histograms() const { return analysis_dir() / "font_histograms.csv"; }
  std::filesystem::path impression_histograms() const { return analysis_dir() / "impression_histograms.csv"; }
  std::filesystem::path average_histogram() const { return analysis_dir() / "average_histogram.csv"; }
  std::filesystem::path delta_histograms() const { return analysis_dir() / "delta_histograms.csv"; }
  std::filesystem::path peaks() const { return analysis_dir() / "peaks.json"; }
  std::filesystem::path part_locations() const { return analysis_dir() / "part_locations.json"; }
  std::filesystem::path bicluster() const { return analysis_dir() / "bicluster.json"; }
  std::filesystem::path distances() const { return analysis_dir() / "distances.csv"; }
  std::filesystem::path neighbors() const { return analysis_dir() / "neighbors.json"; }
  std::filesystem::path eval_dir() const { return root / "eval"; }
  std::filesystem::path predictions() const { return eval_dir() / "predictions.csv"; }
  std::filesystem::path ap_json() const { return eval_dir() / "ap.json"; }
  std::filesystem::path top_table() const { return eval_dir() / "ap_top.csv"; }
  std::filesystem::path bottom_table() const { return eval_dir() / "ap_bottom.csv"; }
  std::filesystem::path report() const { return root / "report.md"; }
};

/// The filtered, split dataset as recorded by the extract stage.
struct FontEntry {
  std::string font_id;
  dataset::Split split = dataset::Split::unassigned;
  std::vector<std::size_t> impressions;
};

struct DatasetTable {
  std::vector<std::string> words;
  std::vector<std::size_t> frequencies;
  std::vector<FontEntry> fonts;
};

DatasetTable read_dataset_table(const Layout& layout);

/// Stages return the process exit code (0, or 2 for a partial failure) and throw on errors.
int cmd_synth(const PipelineConfig& config);
int cmd_extract(const PipelineConfig& config);
int cmd_train(const PipelineConfig& config, bool resume = false);
int cmd_codebook(const PipelineConfig& config);
int cmd_analyze(const PipelineConfig& config);
int cmd_eval(const PipelineConfig& config);
int cmd_report(const PipelineConfig& config);

/// synth (only without an explicit manifest) through report; returns the worst exit code.
int run_all(const PipelineConfig& config);

}  // namespace fontparts::pipeline
