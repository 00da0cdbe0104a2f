#include "fontparts/codebook.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "fontparts/binary_io.hpp"
#include "fontparts/common.hpp"
#include "fontparts/kmeans.hpp"

namespace fontparts::codebook {

namespace {
constexpr std::uint32_t kCodebookVersion = 1;
}

Codebook kmeans_fit(const Eigen::MatrixXd& sample, int q, std::uint64_t seed, int max_iter, double tol,
                    FitReport* report) {
  if (q < 2) throw UsageError("codebook size Q must be at least 2");
  if (sample.cols() < q) {
    throw DataError("k-means sample has " + std::to_string(sample.cols()) + " descriptors, fewer than Q = " +
                    std::to_string(q));
  }
  cluster::KMeansOptions options;
  options.k = q;
  options.max_iter = max_iter;
  options.tol = tol;
  options.seed = seed;
  auto fit = cluster::kmeans(sample, options);

  for (int a = 0; a < q; ++a) {
    for (int b = a + 1; b < q; ++b) {
      if (fit.centroids.col(a) == fit.centroids.col(b)) {
        throw DataError("k-means produced duplicate centroids; the sample has fewer than Q distinct descriptors");
      }
    }
  }

  // occupancy via the exact quantizer
  std::vector<std::uint64_t> counts(q, 0);
  for (Eigen::Index i = 0; i < sample.cols(); ++i) ++counts[cluster::nearest_centroid(fit.centroids, sample.col(i))];
  std::vector<int> order(q);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return counts[a] > counts[b]; });

  Codebook cb;
  cb.centroids.resize(sample.rows(), q);
  cb.occupancy.resize(q);
  for (int i = 0; i < q; ++i) {
    cb.centroids.col(i) = fit.centroids.col(order[i]);
    cb.occupancy[i] = counts[order[i]];
  }
  if (report) {
    report->objective_history = fit.objective_history;
    report->iterations = fit.iterations;
  }
  return cb;
}

Eigen::MatrixXd sample_descriptors(std::span<const sift::DescriptorSet> sets, std::size_t max_count,
                                   std::uint64_t seed) {
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    for (std::size_t d = 0; d < sets[s].descriptors.size(); ++d) all.emplace_back(s, d);
  }
  if (all.size() > max_count) {
    Rng rng(seed);
    for (std::size_t i = 0; i < max_count; ++i) std::swap(all[i], all[i + uniform_index(rng, all.size() - i)]);
    all.resize(max_count);
    std::sort(all.begin(), all.end());
  }
  Eigen::MatrixXd out(sift::kDescriptorDim, static_cast<Eigen::Index>(all.size()));
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& values = sets[all[i].first].descriptors[all[i].second].values;
    for (int r = 0; r < sift::kDescriptorDim; ++r) out(r, static_cast<Eigen::Index>(i)) = values[r];
  }
  return out;
}

int quantize(const Eigen::Ref<const Eigen::VectorXd>& x, const Codebook& codebook) {
  return cluster::nearest_centroid(codebook.centroids, x) + 1;
}

WeightedHistogram accumulate_histogram(std::span<const int> bins, std::span<const double> weights, int q,
                                       std::string owner) {
  if (bins.size() != weights.size()) throw DataError("bin and weight counts differ");
  WeightedHistogram h{std::move(owner), std::vector<double>(static_cast<std::size_t>(q), 0.0)};
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i] < 1 || bins[i] > q) throw DataError("bin index out of range");
    h.bins[bins[i] - 1] += weights[i];
  }
  return h;
}

WeightedHistogram font_histogram(const Eigen::MatrixXd& descriptors, const deepsets::MlpParams& params,
                                 const Codebook& codebook, std::string owner) {
  const int q = codebook.size();
  if (descriptors.cols() == 0) return {std::move(owner), std::vector<double>(static_cast<std::size_t>(q), 0.0)};
  const Eigen::VectorXd norms = deepsets::importances(descriptors, params);
  std::vector<int> bins(static_cast<std::size_t>(descriptors.cols()));
  for (Eigen::Index l = 0; l < descriptors.cols(); ++l) bins[l] = quantize(descriptors.col(l), codebook);
  return accumulate_histogram(bins, std::span(norms.data(), static_cast<std::size_t>(norms.size())), q,
                              std::move(owner));
}

WeightedHistogram impression_histogram(std::span<const WeightedHistogram> font_histograms, std::string owner) {
  if (font_histograms.empty()) throw DataError("impression has no fonts");
  const std::size_t q = font_histograms.front().bins.size();
  WeightedHistogram out{std::move(owner), std::vector<double>(q, 0.0)};
  std::vector<double> column(font_histograms.size());
  for (std::size_t b = 0; b < q; ++b) {
    for (std::size_t i = 0; i < font_histograms.size(); ++i) {
      if (font_histograms[i].bins.size() != q) throw DataError("histogram size mismatch");
      column[i] = font_histograms[i].bins[b];
    }
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    out.bins[b] = n % 2 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return out;
}

WeightedHistogram average_histogram(std::span<const WeightedHistogram> impression_histograms) {
  if (impression_histograms.empty()) throw DataError("no impression histograms to average");
  const std::size_t q = impression_histograms.front().bins.size();
  WeightedHistogram out{"average", std::vector<double>(q, 0.0)};
  for (const auto& h : impression_histograms) {
    if (h.bins.size() != q) throw DataError("histogram size mismatch");
    for (std::size_t b = 0; b < q; ++b) out.bins[b] += h.bins[b];
  }
  for (auto& v : out.bins) v /= static_cast<double>(impression_histograms.size());
  return out;
}

DeltaHistogram delta_histogram(const WeightedHistogram& impression, const WeightedHistogram& average,
                               std::size_t impression_index) {
  if (impression.bins.size() != average.bins.size()) throw DataError("delta_histogram: Q mismatch");
  DeltaHistogram d{impression_index, std::vector<double>(impression.bins.size())};
  for (std::size_t b = 0; b < d.bins.size(); ++b) d.bins[b] = impression.bins[b] - average.bins[b];
  return d;
}

std::vector<Peak> find_peaks(std::span<const double> bins, std::size_t top_n, double min_value) {
  if (top_n < 1) throw UsageError("top_n must be at least 1");
  std::vector<Peak> peaks;
  const std::size_t n = bins.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = bins[i];
    if (!(v > min_value)) continue;
    if (i > 0 && !(v > bins[i - 1])) continue;
    if (i + 1 < n && !(v > bins[i + 1])) continue;
    peaks.push_back({static_cast<int>(i + 1), v});
  }
  std::stable_sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) { return a.value > b.value; });
  if (peaks.size() > top_n) peaks.resize(top_n);
  return peaks;
}

std::vector<PartLocation> locate_parts(const sift::DescriptorSet& set, std::span<const int> peak_bins,
                                       const Codebook& codebook) {
  std::vector<PartLocation> out;
  for (const auto& d : set.descriptors) {
    if (!(d.keypoint.sigma > 0)) {
      throw DataError("descriptor set " + set.font_id + " lacks keypoint metadata");
    }
    Eigen::VectorXd x(sift::kDescriptorDim);
    for (int i = 0; i < sift::kDescriptorDim; ++i) x[i] = d.values[i];
    const int q = quantize(x, codebook);
    if (std::find(peak_bins.begin(), peak_bins.end(), q) != peak_bins.end()) {
      out.push_back({d.glyph_index, d.keypoint.x, d.keypoint.y, d.keypoint.sigma, q});
    }
  }
  return out;
}

std::vector<std::uint8_t> encode_codebook(const Codebook& cb) {
  BinaryWriter w;
  w.magic("GCBK");
  w.u32(kCodebookVersion);
  w.u32(static_cast<std::uint32_t>(cb.size()));
  w.u32(static_cast<std::uint32_t>(cb.centroids.rows()));
  for (Eigen::Index q = 0; q < cb.centroids.cols(); ++q) {
    for (Eigen::Index d = 0; d < cb.centroids.rows(); ++d) w.f64(cb.centroids(d, q));
  }
  for (auto c : cb.occupancy) w.u64(c);
  return w.take();
}

Codebook decode_codebook(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  BinaryReader r(bytes, source);
  r.expect_magic("GCBK");
  if (r.u32() != kCodebookVersion) throw DataError(source + ": unsupported codebook version");
  const auto q = r.u32();
  const auto dim = r.u32();
  if (q < 2 || dim == 0) throw DataError(source + ": invalid codebook shape");
  Codebook cb;
  cb.centroids.resize(dim, q);
  for (std::uint32_t i = 0; i < q; ++i) {
    for (std::uint32_t d = 0; d < dim; ++d) cb.centroids(d, i) = r.f64();
  }
  cb.occupancy.resize(q);
  for (auto& c : cb.occupancy) c = r.u64();
  if (r.remaining() != 0) throw DataError(source + ": trailing bytes in codebook");
  return cb;
}

void save_codebook(const std::filesystem::path& path, const Codebook& codebook) {
  write_file_bytes(path, encode_codebook(codebook));
}

Codebook load_codebook(const std::filesystem::path& path) {
  return decode_codebook(read_file_bytes(path), path.string());
}

std::string format_histogram_csv(std::span<const WeightedHistogram> histograms) {
  std::ostringstream out;
  const std::size_t q = histograms.empty() ? 0 : histograms.front().bins.size();
  out << "owner";
  for (std::size_t b = 1; b <= q; ++b) out << ",bin_" << b;
  out << '\n';
  char buf[40];
  for (const auto& h : histograms) {
    out << h.owner;
    for (double v : h.bins) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

std::vector<WeightedHistogram> parse_histogram_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<WeightedHistogram> out;
  if (!std::getline(in, line)) return out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    WeightedHistogram h;
    std::getline(row, h.owner, ',');
    std::string cell;
    while (std::getline(row, cell, ',')) {
      try {
        h.bins.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw DataError("histogram CSV line " + std::to_string(line_no) + ": bad number \"" + cell + "\"");
      }
    }
    out.push_back(std::move(h));
  }
  return out;
}

}  // namespace fontparts::codebook
