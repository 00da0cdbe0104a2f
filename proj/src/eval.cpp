#include "fontparts/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "fontparts/common.hpp"

namespace fontparts::eval {

RankingList rank_fonts(std::span<const FontPrediction> predictions, std::size_t impression) {
  if (predictions.empty()) throw DataError("empty test set");
  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (const auto& p : predictions) {
    if (impression >= p.likelihoods.size()) throw DataError("font " + p.font_id + " has no prediction for impression");
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double la = predictions[a].likelihoods[impression];
    const double lb = predictions[b].likelihoods[impression];
    if (la != lb) return la > lb;
    return predictions[a].font_id < predictions[b].font_id;
  });
  RankingList out;
  out.impression = impression;
  for (auto i : order) {
    out.font_ids.push_back(predictions[i].font_id);
    out.likelihoods.push_back(predictions[i].likelihoods[impression]);
  }
  return out;
}

double average_precision_from_ranks(std::vector<std::size_t> ranks) {
  if (ranks.empty()) throw DataError("empty relevant set");
  std::sort(ranks.begin(), ranks.end());
  double sum = 0;
  for (std::size_t h = 0; h < ranks.size(); ++h) {
    sum += static_cast<double>(h + 1) / static_cast<double>(ranks[h]);
  }
  return sum / static_cast<double>(ranks.size());
}

ApResult average_precision(const RankingList& ranking, std::span<const std::string> relevant) {
  if (relevant.empty()) throw DataError("empty relevant set");
  std::unordered_map<std::string, std::size_t> rank_of;
  for (std::size_t r = 0; r < ranking.font_ids.size(); ++r) rank_of.emplace(ranking.font_ids[r], r + 1);
  std::vector<std::size_t> ranks;
  for (const auto& id : relevant) {
    auto it = rank_of.find(id);
    if (it == rank_of.end()) throw DataError("relevant font " + id + " is not in the ranking");
    ranks.push_back(it->second);
  }
  std::sort(ranks.begin(), ranks.end());
  if (std::adjacent_find(ranks.begin(), ranks.end()) != ranks.end()) throw DataError("duplicate relevant font");
  return {ranking.impression, average_precision_from_ranks(std::move(ranks)), relevant.size()};
}

double mean_ap(std::span<const ApResult> results) {
  if (results.empty()) throw DataError("no AP results");
  double sum = 0;
  for (const auto& r : results) sum += r.ap;
  return sum / static_cast<double>(results.size());
}

StabilityReport stability_report(std::span<const ApResult> results, std::span<const std::string> words,
                                 std::size_t n) {
  std::vector<ApResult> sorted(results.begin(), results.end());
  auto row = [&](const ApResult& r, std::size_t rank) {
    if (r.impression >= words.size()) throw DataError("impression index outside vocabulary");
    return StabilityRow{rank, words[r.impression], r.ap, r.n_relevant};
  };
  StabilityReport out;
  std::stable_sort(sorted.begin(), sorted.end(), [](const ApResult& a, const ApResult& b) {
    if (a.ap != b.ap) return a.ap > b.ap;
    return a.impression < b.impression;
  });
  for (std::size_t i = 0; i < std::min(n, sorted.size()); ++i) out.top.push_back(row(sorted[i], i + 1));
  std::stable_sort(sorted.begin(), sorted.end(), [](const ApResult& a, const ApResult& b) {
    if (a.ap != b.ap) return a.ap < b.ap;
    return a.impression > b.impression;
  });
  for (std::size_t i = 0; i < std::min(n, sorted.size()); ++i) out.bottom.push_back(row(sorted[i], i + 1));
  return out;
}

std::string format_stability_csv(std::span<const StabilityRow> rows) {
  std::ostringstream out;
  out << "rank,word,ap_percent,n_relevant\n";
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * r.ap);
    out << r.rank << ',' << r.word << ',' << buf << ',' << r.n_relevant << '\n';
  }
  return out.str();
}

}  // namespace fontparts::eval
