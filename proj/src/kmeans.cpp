#include "fontparts/kmeans.hpp"

#include <algorithm>
#include <limits>

#include "fontparts/common.hpp"

namespace fontparts::cluster {

double squared_distance(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) {
  double s = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

int nearest_centroid(const Eigen::MatrixXd& centroids, const Eigen::Ref<const Eigen::VectorXd>& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index q = 0; q < centroids.cols(); ++q) {
    const double d = squared_distance(centroids.col(q), x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(q);
    }
  }
  return best;
}

namespace {

/// Assigns every point; returns the objective computed from exact distances.
double assign(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids, std::vector<int>& labels,
              std::vector<double>& dist) {
  const Eigen::Index n = points.cols();
  const Eigen::Index k = centroids.cols();
  const Eigen::VectorXd c_norm = centroids.colwise().squaredNorm().transpose();
  constexpr Eigen::Index kBlock = 4096;
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index len = std::min(kBlock, n - start);
    // ||c||^2 - 2 c.x ranks centroids; the exact distance is recomputed below.
    const Eigen::MatrixXd scores =
        (-2.0 * centroids.transpose() * points.middleCols(start, len)).colwise() + c_norm;
    for (Eigen::Index j = 0; j < len; ++j) {
      Eigen::Index best = 0;
      double best_s = scores(0, j);
      for (Eigen::Index q = 1; q < k; ++q) {
        if (scores(q, j) < best_s) {
          best_s = scores(q, j);
          best = q;
        }
      }
      labels[start + j] = static_cast<int>(best);
    }
  }
  double objective = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    dist[i] = squared_distance(points.col(i), centroids.col(labels[i]));
    objective += dist[i];
  }
  return objective;
}

Eigen::MatrixXd plus_plus_init(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd centroids(points.rows(), k);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  Eigen::Index pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
  for (int c = 0; c < k; ++c) {
    centroids.col(c) = points.col(pick);
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.col(i), centroids.col(c)));
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (total <= 0) {
      pick = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(n)));
      continue;
    }
    double target = uniform01(rng) * total;
    pick = n - 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      target -= d2[i];
      if (target < 0 && d2[i] > 0) {
        pick = i;
        break;
      }
    }
    while (d2[pick] <= 0 && pick > 0) --pick;
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, const KMeansOptions& options) {
  const Eigen::Index n = points.cols();
  const int k = options.k;
  if (k < 1) throw UsageError("k-means needs k >= 1");
  if (n < k) throw DataError("k-means needs at least k points (" + std::to_string(n) + " < " + std::to_string(k) + ")");
  if (!points.allFinite()) throw NumericalError("k-means input contains non-finite values");

  Rng rng(options.seed);
  KMeansResult result;
  result.centroids = plus_plus_init(points, k, rng);
  result.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);

  result.objective_history.push_back(assign(points, result.centroids, result.labels, dist));
  for (int iter = 0; iter < options.max_iter; ++iter) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
    std::vector<Eigen::Index> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.col(result.labels[i]) += points.col(i);
      ++counts[result.labels[i]];
    }
    Eigen::MatrixXd next = result.centroids;
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.col(c) = sums.col(c) / static_cast<double>(counts[c]);
        continue;
      }
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!taken[i] && (far < 0 || dist[i] > dist[far])) far = i;
      }
      taken[far] = true;
      dist[far] = 0;
      next.col(c) = points.col(far);
    }
    const double shift = (next - result.centroids).colwise().norm().maxCoeff();
    result.centroids = std::move(next);
    result.iterations = iter + 1;
    result.objective_history.push_back(assign(points, result.centroids, result.labels, dist));
    if (shift < options.tol) break;
  }
  return result;
}

}  // namespace fontparts::cluster
