#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace fontparts::cluster {

struct KMeansOptions {
  int k = 8;
  int max_iter = 100;
  double tol = 1e-6;  // stop when no centroid moves farther than this
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Eigen::MatrixXd centroids;  // d x k, one centroid per column
  std::vector<int> labels;    // per point, in [0, k)
  /// Sum of squared distances after every assignment step; non-increasing.
  std::vector<double> objective_history;
  int iterations = 0;
};

/// k-means++ seeding followed by Lloyd iterations over the columns of `points`.
/// An emptied cluster is moved onto the point farthest from its centroid.
KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options);

/// Index of the nearest column of `centroids` by exact squared distance; ties go to the lower index.
int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::Ref<const Eigen::VectorXd>& x);

double squared_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b);

}  // namespace fontparts::cluster
