#include "support.hpp"

#include <algorithm>

#include "fontparts/binary_io.hpp"
#include "fontparts/synthetic.hpp"

using namespace fontparts;
using namespace fontparts::dataset;
namespace fs = std::filesystem;

namespace {

std::uint64_t tree_hash(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) {
    all += fs::relative(f, root).string();
    const auto bytes = read_file_bytes(f);
    all.append(bytes.begin(), bytes.end());
  }
  return fnv1a(all);
}

}  // namespace

TEST_CASE("label rule application") {
  const auto rule = LabelRule::standard();
  FeatureFlags f;
  f.constant_stroke = false;
  f.varying_stroke = true;
  CHECK(rule.apply(f) == std::vector<std::string>{"plain"});
  f.jaggy_contour = true;
  CHECK(rule.apply(f) == std::vector<std::string>{"grunge", "rough"});
  f.serif = true;
  f.constant_stroke = true;
  f.varying_stroke = false;
  CHECK(rule.apply(f) == std::vector<std::string>{"geometric", "grunge", "rough", "serif"});
}

TEST_CASE("rendering is a pure function of spec, seed and index") {
  SyntheticSpec spec;
  spec.glyphs_per_font = 4;
  const auto a = render_synthetic_font(spec, 3, 5);
  const auto b = render_synthetic_font(spec, 3, 5);
  const auto c = render_synthetic_font(spec, 4, 5);
  REQUIRE(a.glyphs.size() == 4);
  bool differs = false;
  for (std::size_t g = 0; g < a.glyphs.size(); ++g) {
    CHECK(a.glyphs[g].image.pixels == b.glyphs[g].image.pixels);
    CHECK(a.glyphs[g].image.width == 64);
    differs = differs || a.glyphs[g].image.pixels != c.glyphs[g].image.pixels;
    const auto ink = std::count(a.glyphs[g].image.pixels.begin(), a.glyphs[g].image.pixels.end(), 0);
    CHECK(ink > 20);
  }
  CHECK(differs);
  CHECK(a.words == LabelRule::standard().apply(a.flags));
}

TEST_CASE("generate_synthetic writes a loadable, reproducible dataset") {
  testing::TempDir dir("synth");
  SyntheticSpec spec;
  spec.n_fonts = 12;
  spec.glyphs_per_font = 3;
  const auto out1 = generate_synthetic(spec, 9, dir / "one");
  const auto out2 = generate_synthetic(spec, 9, dir / "two");
  CHECK(tree_hash(dir / "one") == tree_hash(dir / "two"));

  const auto ds = load_manifest(out1.manifest);
  REQUIRE(ds.records.size() == 12);
  const auto truth = read_truth(out1.truth);
  REQUIRE(truth.size() == 12);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    CHECK(r.glyphs.size() == 3);
    const auto& flags = truth.at(r.font_id);
    CHECK(flags.jaggy_contour == out1.fonts[i].flags.jaggy_contour);
    std::vector<std::string> words;
    for (auto k : r.impressions) words.push_back(ds.vocabulary.word(k));
    CHECK(words == LabelRule::standard().apply(flags));
    const bool rough = std::find(words.begin(), words.end(), "rough") != words.end();
    CHECK(rough == flags.jaggy_contour);
  }
}

TEST_CASE("synthetic edge cases") {
  testing::TempDir dir("synth");
  SyntheticSpec spec;
  spec.n_fonts = 0;
  const auto out = generate_synthetic(spec, 1, dir / "empty");
  CHECK(out.fonts.empty());
  CHECK(parse_manifest(out.manifest).records.empty());
  spec.image_size = 16;
  CHECK_THROWS_AS(generate_synthetic(spec, 1, dir / "small"), UsageError);
}
