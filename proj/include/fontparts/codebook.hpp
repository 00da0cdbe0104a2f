#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fontparts/deepsets.hpp"
#include "fontparts/sift.hpp"

namespace fontparts::codebook {

/// Q visual words. Bin q (1-based) is column q-1 of `centroids`; bins are ordered
/// by descending occupancy on the fitting sample.
struct Codebook {
  Eigen::MatrixXd centroids;            // 128 x Q
  std::vector<std::uint64_t> occupancy;  // per bin, fitting sample

  int size() const { return static_cast<int>(centroids.cols()); }
};

struct FitReport {
  std::vector<double> objective_history;
  int iterations = 0;
};

/// k-means++ / Lloyd on the columns of `sample`, then frequency relabeling.
Codebook kmeans_fit(const Eigen::MatrixXd& sample, int q, std::uint64_t seed, int max_iter = 100, double tol = 1e-6,
                    FitReport* report = nullptr);

/// Seeded uniform sample (without replacement) of at most max_count descriptors from all sets.
Eigen::MatrixXd sample_descriptors(std::span<const sift::DescriptorSet> sets, std::size_t max_count,
                                   std::uint64_t seed);

/// Nearest visual word in [1, Q]; ties go to the smaller q.
int quantize(const Eigen::Ref<const Eigen::VectorXd>& x, const Codebook& codebook);

struct WeightedHistogram {
  std::string owner;
  std::vector<double> bins;  // bins[q-1]
};

/// bins[q] = sum of ||g(x)|| over the descriptors quantized to q. Uses every descriptor.
WeightedHistogram font_histogram(const Eigen::MatrixXd& descriptors, const deepsets::MlpParams& params,
                                 const Codebook& codebook, std::string owner = {});

/// Same accumulation from precomputed assignments (1-based) and importance norms.
WeightedHistogram accumulate_histogram(std::span<const int> bins, std::span<const double> weights, int q,
                                       std::string owner = {});

/// Bin-wise median; even counts average the two middle values.
WeightedHistogram impression_histogram(std::span<const WeightedHistogram> font_histograms, std::string owner = {});

/// Bin-wise arithmetic mean of the impression histograms.
WeightedHistogram average_histogram(std::span<const WeightedHistogram> impression_histograms);

struct DeltaHistogram {
  std::size_t impression = 0;
  std::vector<double> bins;
};

DeltaHistogram delta_histogram(const WeightedHistogram& impression, const WeightedHistogram& average,
                               std::size_t impression_index);

struct Peak {
  int q = 0;  // 1-based bin
  double value = 0;
};

/// Strict local maxima above min_value, largest first, at most top_n.
std::vector<Peak> find_peaks(std::span<const double> bins, std::size_t top_n, double min_value = 0.0);

struct PartLocation {
  std::uint16_t glyph_index = 0;
  double x = 0;
  double y = 0;
  double sigma = 0;
  int q = 0;
};

/// Keypoints of every descriptor whose visual word is one of `peak_bins`.
std::vector<PartLocation> locate_parts(const sift::DescriptorSet& set, std::span<const int> peak_bins,
                                       const Codebook& codebook);

/// GCBK layout: magic, version u32, Q u32, dim u32, row-major f64 centroids (Q x dim), u64 occupancy per bin.
std::vector<std::uint8_t> encode_codebook(const Codebook& codebook);
Codebook decode_codebook(const std::vector<std::uint8_t>& bytes, const std::string& source = "GCBK");
void save_codebook(const std::filesystem::path& path, const Codebook& codebook);
Codebook load_codebook(const std::filesystem::path& path);

/// `owner,bin_1,...,bin_Q` rows with a header line.
std::string format_histogram_csv(std::span<const WeightedHistogram> histograms);
std::vector<WeightedHistogram> parse_histogram_csv(const std::string& text);

}  // namespace fontparts::codebook
