#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fontparts/analysis.hpp"
#include "planted.hpp"

using namespace fontparts;
using namespace fontparts::analysis;

namespace {

BiclusterOptions options(int r, int c, std::uint64_t seed) {
  BiclusterOptions o;
  o.row_clusters = r;
  o.col_clusters = c;
  o.seed = seed;
  return o;
}

std::vector<double> random_hist(Rng& rng, std::size_t q) {
  std::vector<double> h(q);
  for (auto& v : h) v = 10 * uniform01(rng);
  return h;
}

}  // namespace

TEST_CASE("delta matrix") {
  std::vector<codebook::DeltaHistogram> d{{0, {1, -2, 0.5}}, {1, {0, 3, -1}}};
  const auto m = build_delta_matrix(d);
  Eigen::MatrixXd expected(3, 2);
  expected << 1, 0, -2, 3, 0.5, -1;
  CHECK(m.values == expected);
  CHECK(m.column_sums[0] == -0.5);
  CHECK(m.column_sums[1] == 2);
  for (std::size_t k = 0; k < d.size(); ++k) {
    for (std::size_t q = 0; q < 3; ++q) CHECK(m.values(q, k) == d[k].bins[q]);
  }
  std::vector<codebook::DeltaHistogram> single{{0, {0, 0, 0}}};
  CHECK(build_delta_matrix(single).values.isZero(0));
  std::vector<codebook::DeltaHistogram> bad{{0, {1, 2}}, {1, {1}}};
  CHECK_THROWS_AS(build_delta_matrix(bad), DataError);
}

TEST_CASE("bistochastic normalization") {
  Rng rng(1);
  Eigen::MatrixXd m(12, 9);
  for (auto& v : m.reshaped()) v = 0.1 + uniform01(rng);
  const auto n = bistochastic_normalize(m, 1000, 1e-8);
  const Eigen::VectorXd rs = n.rowwise().sum();
  const Eigen::VectorXd cs = n.colwise().sum();
  CHECK((rs.array() - rs.mean()).abs().maxCoeff() < 1e-6);
  CHECK((cs.array() - cs.mean()).abs().maxCoeff() < 1e-6);
  CHECK(n.minCoeff() >= 0);
}

TEST_CASE("planted checkerboard is recovered exactly") {
  const auto cb = testing::make_checkerboard(40, 30, 4, 3, 0.0, 5);
  const auto model = spectral_bicluster(cb.matrix, options(4, 3, 11));
  CHECK(adjusted_rand_index(model.row_labels, cb.row_groups) == 1.0);
  CHECK(adjusted_rand_index(model.col_labels, cb.col_groups) == 1.0);
  CHECK(model.block_means.rows() == 4);
  CHECK(model.block_means.cols() == 3);

  const auto again = spectral_bicluster(cb.matrix, options(4, 3, 11));
  CHECK(again.row_labels == model.row_labels);
  CHECK(again.col_labels == model.col_labels);

  Eigen::Index br, bc;
  cb.block_values.maxCoeff(&br, &bc);
  const auto blocks = top_blocks(model, cb.matrix, 100);
  CHECK(blocks.size() == 12);
  for (std::size_t i = 1; i < blocks.size(); ++i) CHECK(blocks[i - 1].mean >= blocks[i].mean);
  std::vector<int> rows, cols;
  for (int i = 0; i < 40; ++i) {
    if (cb.row_groups[i] == br) rows.push_back(i);
  }
  for (int j = 0; j < 30; ++j) {
    if (cb.col_groups[j] == bc) cols.push_back(j);
  }
  CHECK(blocks[0].rows == rows);
  CHECK(blocks[0].cols == cols);
  for (const auto& b : blocks) {
    double s = 0;
    for (int r : b.rows) {
      for (int c : b.cols) s += cb.matrix(r, c) - model.shift;
    }
    CHECK(std::abs(s / static_cast<double>(b.rows.size() * b.cols.size()) - b.mean) <= 1e-12);
  }
  CHECK(top_blocks(model, cb.matrix, 2).size() == 2);
}

TEST_CASE("noisy checkerboard") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto cb = testing::make_checkerboard(40, 30, 4, 3, 0.1, 100 + seed);
    const auto model = spectral_bicluster(cb.matrix, options(4, 3, seed));
    CHECK(adjusted_rand_index(model.row_labels, cb.row_groups) >= 0.9);
    CHECK(adjusted_rand_index(model.col_labels, cb.col_groups) >= 0.9);
  }
}

TEST_CASE("bicluster equivariance under permutation") {
  const auto cb = testing::make_checkerboard(40, 30, 4, 3, 0.05, 9);
  const auto base = spectral_bicluster(cb.matrix, options(4, 3, 2));
  Rng rng(4);
  std::vector<int> rp(40), cp(30);
  std::iota(rp.begin(), rp.end(), 0);
  std::iota(cp.begin(), cp.end(), 0);
  std::shuffle(rp.begin(), rp.end(), rng);
  std::shuffle(cp.begin(), cp.end(), rng);
  Eigen::MatrixXd rows_only(40, 30), both(40, 30);
  for (int i = 0; i < 40; ++i) {
    rows_only.row(i) = cb.matrix.row(rp[i]);
    for (int j = 0; j < 30; ++j) both(i, j) = cb.matrix(rp[i], cp[j]);
  }
  const auto pr = spectral_bicluster(rows_only, options(4, 3, 2));
  for (int i = 0; i < 40; ++i) CHECK(pr.row_labels[i] == base.row_labels[rp[i]]);
  CHECK(pr.col_labels == base.col_labels);
  CHECK((pr.block_means - base.block_means).cwiseAbs().maxCoeff() <= 1e-12);

  const auto pb = spectral_bicluster(both, options(4, 3, 2));
  for (int i = 0; i < 40; ++i) CHECK(pb.row_labels[i] == base.row_labels[rp[i]]);
  for (int j = 0; j < 30; ++j) CHECK(pb.col_labels[j] == base.col_labels[cp[j]]);
}

TEST_CASE("bicluster errors") {
  const auto cb = testing::make_checkerboard(10, 8, 2, 2, 0.0, 1);
  CHECK_THROWS_AS(spectral_bicluster(cb.matrix, options(1, 2, 0)), UsageError);
  CHECK_THROWS_AS(spectral_bicluster(cb.matrix, options(2, 9, 0)), UsageError);
  CHECK_THROWS_AS(spectral_bicluster(cb.matrix, options(11, 2, 0)), UsageError);
  CHECK_THROWS_WITH_AS(spectral_bicluster(Eigen::MatrixXd::Constant(10, 8, 3.0), options(2, 2, 0)),
                       doctest::Contains("no block structure"), DataError);
}

TEST_CASE("adjusted rand index") {
  std::vector<int> a{0, 0, 1, 1, 2, 2};
  std::vector<int> b{5, 5, 3, 3, 9, 9};
  CHECK(adjusted_rand_index(a, b) == 1.0);
  std::vector<int> c{0, 1, 0, 1, 0, 1};
  CHECK(adjusted_rand_index(a, c) < 0.1);
  // contingency [[2,1],[0,3]]: index 4, row pairs 6, col pairs 7, 15 pairs
  std::vector<int> x{0, 0, 0, 1, 1, 1}, y{0, 0, 1, 1, 1, 1};
  CHECK(adjusted_rand_index(x, y) == doctest::Approx((4 - 42.0 / 15) / (6.5 - 42.0 / 15)).epsilon(1e-12));
  CHECK(adjusted_rand_index(std::vector<int>{0, 0, 1, 1}, std::vector<int>{0, 0, 0, 1}) == 0.0);
}

TEST_CASE("impression distance") {
  const std::vector<double> h{1, 2, 3, 0};
  CHECK(impression_distance(h, h) == 0);
  const std::vector<double> scaled{2.5, 5, 7.5, 0};
  CHECK(impression_distance(h, scaled) <= 1e-15);
  CHECK(impression_distance(std::vector<double>{1, 1, 0, 0}, std::vector<double>{0, 2, 2, 0}) ==
        doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(impression_distance(std::vector<double>{0, 0}, std::vector<double>{3, 0}) == 1.0);

  Rng rng(8);
  for (int t = 0; t < 500; ++t) {
    const auto a = random_hist(rng, 16), b = random_hist(rng, 16), c = random_hist(rng, 16);
    const double ab = impression_distance(a, b), ba = impression_distance(b, a);
    CHECK(ab == ba);
    CHECK(ab >= 0);
    CHECK(impression_distance(a, c) <= ab + impression_distance(b, c) + 1e-12);
    std::vector<double> ca(a);
    for (auto& v : ca) v *= 3.7;
    CHECK(std::abs(impression_distance(ca, b) - ab) <= 1e-12);
  }
}

TEST_CASE("distance matrix and neighbors") {
  Rng rng(10);
  std::vector<std::vector<double>> hs;
  for (int k = 0; k < 6; ++k) hs.push_back(random_hist(rng, 8));
  hs[4] = hs[1];
  for (auto& v : hs[4]) v *= 2;
  const auto d = distance_matrix(hs);
  CHECK(d.rows() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(d(i, i) == 0);
    for (int j = 0; j < 6; ++j) CHECK(d(i, j) == d(j, i));
  }
  const auto nn = nearest_impressions(1, 3, d);
  REQUIRE(nn.size() == 3);
  CHECK(nn[0].impression == 4);
  CHECK(nearest_impressions(4, 1, d)[0].impression == 1);
  for (std::size_t i = 1; i < nn.size(); ++i) CHECK(nn[i - 1].distance <= nn[i].distance);
  CHECK(nearest_impressions(0, 99, d).size() == 5);
  for (const auto& n : nearest_impressions(0, 99, d)) CHECK(n.impression != 0);

  const auto dd = distance_matrix(hs, SimilarityBasis::delta);
  CHECK(dd(0, 1) == doctest::Approx((Eigen::Map<const Eigen::VectorXd>(hs[0].data(), 8) -
                                     Eigen::Map<const Eigen::VectorXd>(hs[1].data(), 8))
                                        .norm())
                        .epsilon(1e-12));

  std::vector<std::vector<double>> two{{1, 0}, {0, 1}};
  const auto d2 = distance_matrix(two);
  CHECK(nearest_impressions(0, 5, d2).size() == 1);
  CHECK(nearest_impressions(0, 5, d2)[0].impression == 1);

  // ties broken by index
  std::vector<std::vector<double>> tie{{1, 0}, {0, 1}, {0, 1}};
  const auto nt = nearest_impressions(0, 2, distance_matrix(tie));
  CHECK(nt[0].impression == 1);
  CHECK(nt[1].impression == 2);
}
