#pragma once

#include <string>
#include <vector>

#include "fontparts/common.hpp"
#include "fontparts/eval.hpp"

namespace testing {

/// Walks the ranking top-down; at each relevant font adds hits-so-far / position.
inline double enumerate_ap(const fontparts::eval::RankingList& ranking, const std::vector<std::string>& relevant) {
  double sum = 0;
  std::size_t hits = 0;
  for (std::size_t pos = 1; pos <= ranking.font_ids.size(); ++pos) {
    bool is_rel = false;
    for (const auto& id : relevant) is_rel = is_rel || id == ranking.font_ids[pos - 1];
    if (!is_rel) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(pos);
  }
  return sum / static_cast<double>(relevant.size());
}

struct ApInstance {
  std::vector<fontparts::eval::FontPrediction> predictions;
  std::vector<std::string> relevant;
};

/// n in [1, 20] fonts with coarse likelihoods (ties are common) and a non-empty relevant subset.
inline ApInstance random_ap_instance(fontparts::Rng& rng) {
  ApInstance inst;
  const std::size_t n = 1 + fontparts::uniform_index(rng, 20);
  for (std::size_t i = 0; i < n; ++i) {
    const double l = static_cast<double>(fontparts::uniform_index(rng, 6)) / 5.0;
    inst.predictions.push_back({"font" + std::to_string(fontparts::uniform_index(rng, 1000)) + "_" + std::to_string(i), {l}});
    if (fontparts::uniform01(rng) < 0.4) inst.relevant.push_back(inst.predictions.back().font_id);
  }
  if (inst.relevant.empty()) inst.relevant.push_back(inst.predictions[fontparts::uniform_index(rng, n)].font_id);
  return inst;
}

}  // namespace testing
