#include "support.hpp"

#include <algorithm>
#include <cmath>

#include "ap_oracle.hpp"
#include "fontparts/eval.hpp"

using namespace fontparts;
using namespace fontparts::eval;

namespace {

std::vector<FontPrediction> preds(std::vector<std::pair<std::string, double>> v) {
  std::vector<FontPrediction> out;
  for (auto& [id, l] : v) out.push_back({id, {l}});
  return out;
}

std::vector<std::string> ids(std::initializer_list<const char*> v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("rank_fonts tie rule") {
  const auto r = rank_fonts(preds({{"b", 0.9}, {"a", 0.9}, {"c", 0.1}}), 0);
  CHECK(r.font_ids == ids({"a", "b", "c"}));
  CHECK(r.likelihoods == std::vector<double>{0.9, 0.9, 0.1});
  CHECK(rank_fonts(preds({{"x", 0.3}}), 0).font_ids == ids({"x"}));
  CHECK_THROWS_WITH_AS(rank_fonts(std::vector<FontPrediction>{}, 0), doctest::Contains("empty test set"), DataError);
  CHECK_THROWS_AS(rank_fonts(preds({{"x", 0.3}}), 1), DataError);

  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto inst = testing::random_ap_instance(rng);
    auto ranked = rank_fonts(inst.predictions, 0).font_ids;
    std::vector<std::string> input;
    for (const auto& p : inst.predictions) input.push_back(p.font_id);
    std::sort(ranked.begin(), ranked.end());
    std::sort(input.begin(), input.end());
    CHECK(ranked == input);
  }
}

TEST_CASE("average precision examples") {
  const auto r = rank_fonts(preds({{"a", 0.9}, {"b", 0.8}, {"c", 0.7}, {"d", 0.1}}), 0);
  CHECK(average_precision(r, ids({"a", "b"})).ap == 1.0);
  const auto ap = average_precision(r, ids({"a", "c"}));
  CHECK(std::abs(ap.ap - 0.833333) <= 1e-6);
  CHECK(std::abs(ap.ap - (1.0 + 2.0 / 3.0) / 2.0) <= 1e-12);
  CHECK(ap.n_relevant == 2);
  CHECK(average_precision_from_ranks({3, 1}) == ap.ap);
  CHECK_THROWS_WITH_AS(average_precision(r, std::vector<std::string>{}), doctest::Contains("empty"), DataError);
  CHECK_THROWS_AS(average_precision(r, ids({"a", "zz"})), DataError);
  CHECK_THROWS_AS(average_precision(r, ids({"a", "a"})), DataError);
}

TEST_CASE("average precision matches enumeration") {
  Rng rng(2024);
  for (int t = 0; t < 1000; ++t) {
    const auto inst = testing::random_ap_instance(rng);
    const auto r = rank_fonts(inst.predictions, 0);
    const double ap = average_precision(r, inst.relevant).ap;
    CHECK(ap == testing::enumerate_ap(r, inst.relevant));
    CHECK(ap >= 0);
    CHECK(ap <= 1);
  }
}

TEST_CASE("AP invariance and monotonicity") {
  Rng rng(7);
  for (int t = 0; t < 200; ++t) {
    auto inst = testing::random_ap_instance(rng);
    const double base = average_precision(rank_fonts(inst.predictions, 0), inst.relevant).ap;
    auto transformed = inst.predictions;
    for (auto& p : transformed) p.likelihoods[0] = std::exp(3 * p.likelihoods[0]) - 7;
    CHECK(average_precision(rank_fonts(transformed, 0), inst.relevant).ap == base);

    const auto ranking = rank_fonts(inst.predictions, 0);
    std::vector<std::size_t> ranks;
    for (std::size_t i = 0; i < ranking.font_ids.size(); ++i) {
      if (std::find(inst.relevant.begin(), inst.relevant.end(), ranking.font_ids[i]) != inst.relevant.end()) ranks.push_back(i + 1);
    }
    // move one relevant font to a strictly worse, unoccupied rank
    for (std::size_t j = 0; j < ranks.size(); ++j) {
      std::size_t worse = ranks[j] + 1;
      while (std::find(ranks.begin(), ranks.end(), worse) != ranks.end()) ++worse;
      auto moved = ranks;
      moved[j] = worse;
      CHECK(average_precision_from_ranks(moved) <= average_precision_from_ranks(ranks));
    }
  }
}

TEST_CASE("mean_ap") {
  std::vector<ApResult> one{{0, 0.37, 4}};
  CHECK(mean_ap(one) == 0.37);
  std::vector<ApResult> two{{0, 1.0, 1}, {1, 0.0, 2}};
  CHECK(mean_ap(two) == 0.5);
  std::vector<ApResult> three{{0, 0.2, 1}, {1, 0.5, 1}, {2, 0.9, 1}};
  CHECK(mean_ap(three) == doctest::Approx((0.2 + 0.5 + 0.9) / 3).epsilon(1e-15));
  CHECK_THROWS_AS(mean_ap(std::vector<ApResult>{}), DataError);
}

TEST_CASE("stability tables") {
  std::vector<std::string> words{"bold", "calm", "rough"};
  std::vector<ApResult> results{{0, 0.2, 3}, {1, 0.5, 4}, {2, 0.9, 5}};
  const auto rep = stability_report(results, words, 3);
  REQUIRE(rep.top.size() == 3);
  CHECK(rep.top[0].word == "rough");
  CHECK(rep.top[1].word == "calm");
  CHECK(rep.top[2].word == "bold");
  CHECK(rep.top[0].rank == 1);
  CHECK(rep.bottom[0].word == "bold");

  const auto small = stability_report(results, words, 1);
  CHECK(small.top.size() == 1);
  CHECK(small.top[0].word != small.bottom[0].word);

  std::vector<std::string> many_words;
  std::vector<ApResult> many;
  Rng rng(3);
  for (std::size_t k = 0; k < 12; ++k) {
    many_words.push_back("w" + std::to_string(k));
    many.push_back({k, static_cast<double>(uniform_index(rng, 4)) / 4, 1});
  }
  const auto r6 = stability_report(many, many_words, 6);
  for (const auto& a : r6.top) {
    for (const auto& b : r6.bottom) CHECK(a.word != b.word);
  }
  for (std::size_t i = 1; i < r6.top.size(); ++i) CHECK(r6.top[i - 1].ap >= r6.top[i].ap);
  for (std::size_t i = 1; i < r6.bottom.size(); ++i) CHECK(r6.bottom[i - 1].ap <= r6.bottom[i].ap);

  const auto csv = format_stability_csv(rep.top);
  CHECK(csv == "rank,word,ap_percent,n_relevant\n1,rough,90.00,5\n2,calm,50.00,4\n3,bold,20.00,3\n");
}
