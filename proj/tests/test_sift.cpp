#include "support.hpp"

#include <numbers>

#include "fontparts/descriptor_io.hpp"
#include "fontparts/sift.hpp"
#include "fontparts/synthetic.hpp"
#include "sift_oracles.hpp"

using namespace fontparts;
using namespace fontparts::sift;

namespace {

FloatImage square_image() {
  FloatImage img(64, 64, 0.0f);
  for (int y = 20; y < 44; ++y)
    for (int x = 20; x < 44; ++x) img.at(x, y) = 1.0f;
  return img;
}

/// Every strict 26-neighbour DoG extremum above the prefilter, octave coordinates.
struct RawExtremum {
  int octave, level, x, y;
};

std::vector<RawExtremum> exhaustive_extrema(const ScaleSpace& ss, double threshold) {
  std::vector<RawExtremum> out;
  for (int o = 0; o < static_cast<int>(ss.octaves.size()); ++o) {
    const auto& dogs = ss.octaves[o].dogs;
    for (int l = 1; l + 1 < static_cast<int>(dogs.size()); ++l) {
      const auto& d = dogs[l];
      for (int y = 1; y < d.height - 1; ++y) {
        for (int x = 1; x < d.width - 1; ++x) {
          const float v = d.at(x, y);
          if (std::abs(v) <= threshold) continue;
          bool is_max = true, is_min = true;
          for (int dl = -1; dl <= 1; ++dl)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                if (!dl && !dy && !dx) continue;
                const float n = dogs[l + dl].at(x + dx, y + dy);
                is_max = is_max && v > n;
                is_min = is_min && v < n;
              }
          if (is_max || is_min) out.push_back({o, l, x, y});
        }
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("gaussian blurs compose by variance") {
  const auto img = square_image();
  const auto twice = gaussian_blur(gaussian_blur(img, 1.2), 1.6);
  const auto once = gaussian_blur(img, std::hypot(1.2, 1.6));
  double worst = 0;
  for (int y = 8; y < 56; ++y)
    for (int x = 8; x < 56; ++x) worst = std::max(worst, static_cast<double>(std::abs(twice.at(x, y) - once.at(x, y))));
  CHECK(worst < 1e-3);
  const auto same = gaussian_blur(img, 0.0);
  CHECK(same.data == img.data);
}

TEST_CASE("scale space structure") {
  const auto ss = build_scale_space(square_image(), 4, 3, 1.6);
  REQUIRE(ss.octaves.size() == 4);
  for (const auto& o : ss.octaves) {
    CHECK(o.gaussians.size() == 6);
    CHECK(o.dogs.size() == 5);
  }
  CHECK(ss.octaves[0].gaussians[0].width == 128);
  CHECK(ss.octaves[1].gaussians[0].width == 64);
  CHECK(default_octaves(64, 64) == 4);
  CHECK_THROWS_AS(build_scale_space(FloatImage(6, 6, 0.5f), 1, 3, 1.6), DataError);
}

TEST_CASE("constant image has zero DoG and no keypoints") {
  const auto ss = build_scale_space(FloatImage(64, 64, 0.5f), 4, 3, 1.6);
  for (const auto& o : ss.octaves)
    for (const auto& d : o.dogs)
      for (float v : d.data) REQUIRE(v == 0.0f);
  CHECK(detect_keypoints(ss, 0.03, 10).empty());
  const auto img = square_image();
  CHECK(detect_keypoints(build_scale_space(img, 4, 3, 1.6), std::numeric_limits<double>::infinity(), 10).empty());
}

TEST_CASE("white square: keypoints at the four corners, all backed by raw extrema") {
  const auto ss = build_scale_space(square_image(), 4, 3, 1.6);
  const auto kps = detect_keypoints(ss, 0.03, 10);
  const double cs[2] = {19.5, 43.5};
  for (double cy : cs) {
    for (double cx : cs) {
      int near = 0;
      for (const auto& k : kps) near += std::max(std::abs(k.x - cx), std::abs(k.y - cy)) <= 3.0;
      CHECK_MESSAGE(near >= 1, "corner " << cx << "," << cy);
    }
  }
  CHECK(kps.size() >= 4);
  const auto raw = exhaustive_extrema(ss, 0.5 * 0.03 / 3);
  for (const auto& k : kps) {
    bool backed = false;
    const double step = ss.octave_step(k.octave);
    const double ox = (k.x + 0.5) / step - 0.5;
    const double oy = (k.y + 0.5) / step - 0.5;
    for (const auto& r : raw) {
      if (r.octave == k.octave && std::abs(r.level - k.level) <= 1 && std::abs(r.x - ox) <= 1.5 &&
          std::abs(r.y - oy) <= 1.5)
        backed = true;
    }
    CHECK(backed);
  }
}

TEST_CASE("step edge orientation follows the gradient") {
  FloatImage img(64, 64, 0.0f);
  for (int y = 32; y < 64; ++y)
    for (int x = 0; x < 64; ++x) img.at(x, y) = 1.0f;
  const auto ss = build_scale_space(img, 3, 3, 1.6);
  Keypoint kp;
  kp.x = 32;
  kp.y = 31.5;
  kp.octave = 0;
  kp.level = 1;
  kp.sigma = ss.level_sigma(0, 1) / ss.input_scale;
  const auto oriented = assign_orientations(ss, kp);
  REQUIRE(!oriented.empty());
  CHECK(testing::angle_diff(oriented.front().orientation, std::numbers::pi / 2) < 5 * std::numbers::pi / 180);

  const auto hist = orientation_histogram(ss, kp);
  const double peak = *std::max_element(hist.begin(), hist.end());
  for (const auto& k : oriented) {
    const int bin = static_cast<int>(std::lround(k.orientation * 36 / (2 * std::numbers::pi))) % 36;
    CHECK(hist[bin] >= 0.8 * peak - 1e-12);
  }

  Keypoint far = kp;
  far.x = -1000;
  far.y = -1000;
  CHECK(assign_orientations(ss, far).empty());
}

TEST_CASE("flat window gives no descriptor") {
  const auto ss = build_scale_space(FloatImage(64, 64, 0.3f), 3, 3, 1.6);
  Keypoint kp;
  kp.x = 32;
  kp.y = 32;
  kp.level = 1;
  kp.sigma = ss.level_sigma(0, 1) / ss.input_scale;
  CHECK_FALSE(compute_descriptor(ss, kp).has_value());
  std::array<double, kDescriptorDim> zero{};
  CHECK_FALSE(normalize_descriptor(zero).has_value());
}

TEST_CASE("normalize_descriptor clamps and renormalizes") {
  std::array<double, kDescriptorDim> raw{};
  raw[0] = 10;
  raw[1] = 1;
  const auto d = normalize_descriptor(raw);
  REQUIRE(d.has_value());
  double n = 0;
  for (float v : *d) {
    CHECK(v <= 1.0f);
    n += static_cast<double>(v) * v;
  }
  CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK((*d)[0] > (*d)[1]);
}

TEST_CASE("extraction on synthetic glyphs: unit norm, determinism, rotation") {
  dataset::SyntheticSpec spec;
  spec.glyphs_per_font = 4;
  const auto font = dataset::render_synthetic_font(spec, 2, 1);
  const SiftParams params;
  std::size_t total = 0, matched = 0;
  for (const auto& g : font.glyphs) {
    const auto a = extract_image(g.image, params);
    const auto b = extract_image(g.image, params);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].values == b[i].values);
      double n = 0;
      for (float v : a[i].values) n += static_cast<double>(v) * v;
      CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-6);
    }
    const auto r = extract_image(testing::rotate90(g.image), params);
    const auto m = testing::match_rotated(a, r, g.image.height);
    total += m.original;
    matched += m.matched;
    CHECK(m.max_descriptor_distance <= 0.15);
  }
  REQUIRE(total > 0);
  CHECK(static_cast<double>(matched) / total >= 0.8);
}

TEST_CASE("font extraction concatenates glyphs; blank glyphs give an empty set") {
  dataset::SyntheticSpec spec;
  spec.glyphs_per_font = 3;
  const auto font = dataset::render_synthetic_font(spec, 5, 0);
  dataset::FontRecord rec;
  rec.font_id = font.font_id;
  rec.glyphs = font.glyphs;
  const auto set = extract_font_descriptors(rec, {});
  std::size_t expected = 0;
  for (const auto& g : font.glyphs) expected += extract_image(g.image, {}).size();
  CHECK(set.descriptors.size() == expected);
  for (std::size_t i = 1; i < set.descriptors.size(); ++i)
    CHECK(set.descriptors[i - 1].glyph_index <= set.descriptors[i].glyph_index);

  dataset::FontRecord blank;
  blank.font_id = "blank";
  blank.glyphs.push_back({"blank", U'A', GrayImage(64, 64, 255)});
  CHECK(extract_font_descriptors(blank, {}).descriptors.empty());
  dataset::FontRecord none;
  CHECK_THROWS_AS(extract_font_descriptors(none, {}), DataError);

  const auto bytes = encode_descriptor_set(set);
  const auto back = decode_descriptor_set(bytes);
  REQUIRE(back.descriptors.size() == set.descriptors.size());
  CHECK(back.font_id == set.font_id);
  for (std::size_t i = 0; i < set.descriptors.size(); ++i) {
    CHECK(back.descriptors[i].values == set.descriptors[i].values);
    CHECK(back.descriptors[i].glyph_index == set.descriptors[i].glyph_index);
    CHECK(back.descriptors[i].keypoint.x == static_cast<float>(set.descriptors[i].keypoint.x));
  }
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(decode_descriptor_set(truncated), DataError);
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_descriptor_set(extra), DataError);
}
