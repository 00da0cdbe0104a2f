#include "fontparts/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "fontparts/common.hpp"
#include "fontparts/kmeans.hpp"

namespace fontparts::analysis {

DeltaMatrix build_delta_matrix(std::span<const codebook::DeltaHistogram> deltas) {
  if (deltas.empty()) throw DataError("no delta histograms");
  const std::size_t q = deltas.front().bins.size();
  DeltaMatrix m;
  m.values.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(deltas.size()));
  m.column_sums.resize(static_cast<Eigen::Index>(deltas.size()));
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (deltas[k].bins.size() != q) throw DataError("delta histograms disagree on Q");
    double sum = 0;
    for (std::size_t b = 0; b < q; ++b) {
      m.values(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k)) = deltas[k].bins[b];
      sum += deltas[k].bins[b];
    }
    m.column_sums[static_cast<Eigen::Index>(k)] = sum;
  }
  return m;
}

Eigen::MatrixXd bistochastic_normalize(const Eigen::MatrixXd& nonnegative, int max_rounds, double tol) {
  Eigen::MatrixXd x = nonnegative;
  auto inv_sqrt = [](double s) { return s > 0 ? 1.0 / std::sqrt(s) : 0.0; };
  for (int round = 0; round < max_rounds; ++round) {
    const Eigen::VectorXd r = x.rowwise().sum().unaryExpr(inv_sqrt);
    const Eigen::VectorXd c = x.colwise().sum().transpose().unaryExpr(inv_sqrt);
    Eigen::MatrixXd next = r.asDiagonal() * x * c.asDiagonal();
    const double change = (next - x).norm();
    x = std::move(next);
    if (change < tol) break;
  }
  return x;
}

namespace {

/// Seeded k-means on feature rows, independent of row order: rows are visited in
/// lexicographic order and clusters are renumbered by an order-free key.
std::vector<int> cluster_rows(const Eigen::MatrixXd& features, const Eigen::MatrixXd& shifted_rows, int k,
                              std::uint64_t seed, int restarts) {
  const Eigen::Index n = features.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      if (features(a, c) != features(b, c)) return features(a, c) < features(b, c);
    }
    return false;
  });
  Eigen::MatrixXd points(features.cols(), n);
  for (Eigen::Index i = 0; i < n; ++i) points.col(i) = features.row(order[i]).transpose();

  cluster::KMeansResult best;
  double best_objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    cluster::KMeansOptions opt;
    opt.k = k;
    opt.max_iter = 300;
    opt.tol = 1e-12;
    opt.seed = derive_seed(seed, "bicluster-kmeans", static_cast<std::uint64_t>(r));
    auto fit = cluster::kmeans(points, opt);
    if (fit.objective_history.back() < best_objective) {
      best_objective = fit.objective_history.back();
      best = std::move(fit);
    }
  }
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) labels[order[i]] = best.labels[i];

  // Canonical numbering: by mean value of the member rows, then member count, then spread.
  struct Key {
    double mean;
    double count;
    double energy;
    int old;
  };
  std::vector<Key> keys(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) keys[c] = {0, 0, 0, c};
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& key = keys[labels[i]];
    key.mean += shifted_rows.row(i).mean();
    key.energy += shifted_rows.row(i).squaredNorm();
    key.count += 1;
  }
  for (auto& key : keys) {
    if (key.count > 0) {
      key.mean /= key.count;
      key.energy /= key.count;
    } else {
      key.mean = std::numeric_limits<double>::infinity();
    }
  }
  auto rounded = [](double v) { return std::isfinite(v) ? std::round(v * 1e9) / 1e9 : v; };
  std::stable_sort(keys.begin(), keys.end(), [&](const Key& a, const Key& b) {
    if (rounded(a.mean) != rounded(b.mean)) return rounded(a.mean) < rounded(b.mean);
    if (a.count != b.count) return a.count > b.count;
    return rounded(a.energy) < rounded(b.energy);
  });
  std::vector<int> remap(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) remap[keys[c].old] = c;
  for (auto& l : labels) l = remap[l];
  return labels;
}

}  // namespace

BiclusterModel spectral_bicluster(const Eigen::MatrixXd& matrix, const BiclusterOptions& options) {
  const int q = static_cast<int>(matrix.rows());
  const int k = static_cast<int>(matrix.cols());
  const int r = options.row_clusters;
  const int c = options.col_clusters;
  if (r < 2 || c < 2) throw UsageError("biclustering needs at least 2 row and 2 column clusters");
  if (r > q || c > k) {
    throw UsageError("biclustering cluster counts (" + std::to_string(r) + ", " + std::to_string(c) +
                     ") exceed matrix shape " + std::to_string(q) + "x" + std::to_string(k));
  }
  if (options.n_singular_vectors < 1) throw UsageError("n_singular_vectors must be at least 1");
  if (!matrix.allFinite()) throw NumericalError("bicluster input contains non-finite values");

  BiclusterModel model;
  model.shift = matrix.minCoeff();
  if (matrix.maxCoeff() == model.shift) throw DataError("no block structure");
  const Eigen::MatrixXd shifted = matrix.array() - model.shift;
  const Eigen::MatrixXd normalized =
      bistochastic_normalize(shifted, options.max_scaling_rounds, options.scaling_tol);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(normalized, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("SVD failed to converge");
  Eigen::MatrixXd u = svd.matrixU();
  Eigen::MatrixXd v = svd.matrixV();
  if (!u.allFinite() || !v.allFinite()) throw NumericalError("SVD failed to converge");

  const int available = std::min(q, k) - 1;
  const int n = std::min(options.n_singular_vectors, available);
  if (n < 1) throw DataError("matrix too small for spectral biclustering");
  // sign of each pair: largest left-vector entry positive
  for (int i = 1; i <= n; ++i) {
    Eigen::Index arg;
    u.col(i).cwiseAbs().maxCoeff(&arg);
    if (u(arg, i) < 0) {
      u.col(i) = -u.col(i);
      v.col(i) = -v.col(i);
    }
  }
  const Eigen::MatrixXd row_features = shifted * v.middleCols(1, n);
  const Eigen::MatrixXd col_features = shifted.transpose() * u.middleCols(1, n);

  model.row_labels = cluster_rows(row_features, shifted, r, derive_seed(options.seed, "rows"),
                                  options.kmeans_restarts);
  model.col_labels = cluster_rows(col_features, shifted.transpose(), c, derive_seed(options.seed, "cols"),
                                  options.kmeans_restarts);

  model.block_means = Eigen::MatrixXd::Zero(r, c);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(r, c);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < k; ++j) {
      model.block_means(model.row_labels[i], model.col_labels[j]) += shifted(i, j);
      counts(model.row_labels[i], model.col_labels[j]) += 1;
    }
  }
  for (int a = 0; a < r; ++a) {
    for (int b = 0; b < c; ++b) {
      model.block_means(a, b) =
          counts(a, b) > 0 ? model.block_means(a, b) / counts(a, b) : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return model;
}

std::vector<Block> top_blocks(const BiclusterModel& model, const Eigen::MatrixXd& matrix, std::size_t n) {
  std::vector<Block> blocks;
  for (Eigen::Index a = 0; a < model.block_means.rows(); ++a) {
    for (Eigen::Index b = 0; b < model.block_means.cols(); ++b) {
      Block blk;
      blk.row_cluster = static_cast<int>(a);
      blk.col_cluster = static_cast<int>(b);
      for (std::size_t i = 0; i < model.row_labels.size(); ++i) {
        if (model.row_labels[i] == a) blk.rows.push_back(static_cast<int>(i));
      }
      for (std::size_t j = 0; j < model.col_labels.size(); ++j) {
        if (model.col_labels[j] == b) blk.cols.push_back(static_cast<int>(j));
      }
      if (blk.rows.empty() || blk.cols.empty()) continue;
      double sum = 0;
      for (int i : blk.rows) {
        for (int j : blk.cols) sum += matrix(i, j) - model.shift;
      }
      blk.mean = sum / static_cast<double>(blk.rows.size() * blk.cols.size());
      blocks.push_back(std::move(blk));
    }
  }
  std::stable_sort(blocks.begin(), blocks.end(), [](const Block& x, const Block& y) { return x.mean > y.mean; });
  if (blocks.size() > n) blocks.resize(n);
  return blocks;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw DataError("label vectors differ in length");
  const std::size_t n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows;
  std::map<int, double> cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  auto pairs = [](double m) { return m * (m - 1) / 2; };
  double index = 0;
  for (const auto& [key, m] : table) index += pairs(m);
  double sum_rows = 0;
  for (const auto& [key, m] : rows) sum_rows += pairs(m);
  double sum_cols = 0;
  for (const auto& [key, m] : cols) sum_cols += pairs(m);
  const double expected = sum_rows * sum_cols / pairs(static_cast<double>(n));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both partitions trivial and identical in structure
  return (index - expected) / (max_index - expected);
}

double impression_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("impression_distance: Q mismatch");
  const double sa = std::accumulate(a.begin(), a.end(), 0.0, [](double s, double v) { return s + std::abs(v); });
  const double sb = std::accumulate(b.begin(), b.end(), 0.0, [](double s, double v) { return s + std::abs(v); });
  double d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = sa > 0 ? a[i] / sa : 0.0;
    const double y = sb > 0 ? b[i] / sb : 0.0;
    d2 += (x - y) * (x - y);
  }
  return std::sqrt(d2);
}

Eigen::MatrixXd distance_matrix(std::span<const std::vector<double>> histograms, SimilarityBasis basis) {
  const auto k = static_cast<Eigen::Index>(histograms.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      double v;
      if (basis == SimilarityBasis::histogram) {
        v = impression_distance(histograms[i], histograms[j]);
      } else {
        if (histograms[i].size() != histograms[j].size()) throw DataError("distance_matrix: Q mismatch");
        double s = 0;
        for (std::size_t b = 0; b < histograms[i].size(); ++b) {
          s += (histograms[i][b] - histograms[j][b]) * (histograms[i][b] - histograms[j][b]);
        }
        v = std::sqrt(s);
      }
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

std::vector<Neighbor> nearest_impressions(std::size_t k, std::size_t n, const Eigen::MatrixXd& distances) {
  const auto total = static_cast<std::size_t>(distances.rows());
  if (k >= total) throw DataError("impression index out of range");
  std::vector<Neighbor> out;
  for (std::size_t j = 0; j < total; ++j) {
    if (j != k) out.push_back({j, distances(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j))});
  }
  std::stable_sort(out.begin(), out.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.impression < b.impression;
  });
  if (out.size() > n) out.resize(n);
  return out;
}

}  // namespace fontparts::analysis
