#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fontparts::eval {

/// One font's predicted likelihoods over all K impressions.
struct FontPrediction {
  std::string font_id;
  std::vector<double> likelihoods;
};

struct RankingList {
  std::size_t impression = 0;
  std::vector<std::string> font_ids;  // rank r is font_ids[r-1]
  std::vector<double> likelihoods;
};

/// Orders by likelihood descending, then font_id ascending.
RankingList rank_fonts(std::span<const FontPrediction> predictions, std::size_t impression);

struct ApResult {
  std::size_t impression = 0;
  double ap = 0;
  std::size_t n_relevant = 0;
};

/// (sum over relevant fonts h of h / r_h) / |relevant|, h counted in ascending rank order.
ApResult average_precision(const RankingList& ranking, std::span<const std::string> relevant);

/// Same formula on the 1-based ranks of the relevant fonts.
double average_precision_from_ranks(std::vector<std::size_t> ranks);

double mean_ap(std::span<const ApResult> results);

struct StabilityRow {
  std::size_t rank = 0;
  std::string word;
  double ap = 0;
  std::size_t n_relevant = 0;
};

struct StabilityReport {
  std::vector<StabilityRow> top;
  std::vector<StabilityRow> bottom;
};

/// Top n by AP descending (ties by vocabulary index); bottom n is the reverse of that order.
StabilityReport stability_report(std::span<const ApResult> results, std::span<const std::string> words,
                                 std::size_t n);

/// `rank,word,ap_percent,n_relevant` with two decimals.
std::string format_stability_csv(std::span<const StabilityRow> rows);

}  // namespace fontparts::eval
