#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

#include "fontparts/codebook.hpp"

namespace fontparts::analysis {

/// Q x K; column k is the delta histogram of impression k.
struct DeltaMatrix {
  Eigen::MatrixXd values;
  Eigen::VectorXd column_sums;
};

DeltaMatrix build_delta_matrix(std::span<const codebook::DeltaHistogram> deltas);

struct BiclusterOptions {
  int row_clusters = 8;
  int col_clusters = 8;
  int n_singular_vectors = 6;
  std::uint64_t seed = 0;
  int max_scaling_rounds = 1000;
  double scaling_tol = 1e-8;
  int kmeans_restarts = 10;
};

struct BiclusterModel {
  std::vector<int> row_labels;  // Q entries in [0, R)
  std::vector<int> col_labels;  // K entries in [0, C)
  /// Block means of the shifted (non-negative) matrix; NaN for an empty block.
  Eigen::MatrixXd block_means;
  /// Global minimum subtracted before normalization.
  double shift = 0;
};

/// Alternating row/column scaling toward a bistochastic-like matrix.
Eigen::MatrixXd bistochastic_normalize(const Eigen::MatrixXd& nonnegative, int max_rounds, double tol);

/// Shift to non-negative, normalize, project the shifted rows and columns onto the
/// leading non-trivial singular vectors, then cluster each side with seeded k-means.
/// Cluster ids are canonical: they do not depend on the input row or column order.
BiclusterModel spectral_bicluster(const Eigen::MatrixXd& matrix, const BiclusterOptions& options);

struct Block {
  int row_cluster = 0;
  int col_cluster = 0;
  double mean = 0;  // on the shifted matrix
  std::vector<int> rows;
  std::vector<int> cols;
};

/// Non-empty blocks by descending mean, at most n.
std::vector<Block> top_blocks(const BiclusterModel& model, const Eigen::MatrixXd& matrix, std::size_t n);

double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

/// Euclidean distance between L1-normalized histograms (all-zero stays zero).
double impression_distance(std::span<const double> a, std::span<const double> b);

enum class SimilarityBasis { histogram, delta };

/// K x K distances. `histogram` uses impression_distance on H_k; `delta` uses plain
/// Euclidean distance between the delta histograms.
Eigen::MatrixXd distance_matrix(std::span<const std::vector<double>> histograms,
                                SimilarityBasis basis = SimilarityBasis::histogram);

struct Neighbor {
  std::size_t impression = 0;
  double distance = 0;
};

/// The n closest impressions to k (excluding k), ties by index. Returns at most K-1 entries.
std::vector<Neighbor> nearest_impressions(std::size_t k, std::size_t n, const Eigen::MatrixXd& distances);

}  // namespace fontparts::analysis
