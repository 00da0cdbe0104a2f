#include "fontparts/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fontparts/binary_io.hpp"
#include "fontparts/common.hpp"

namespace fontparts::dataset {

namespace fs = std::filesystem;

const char* to_string(Feature f) {
  switch (f) {
    case Feature::serif: return "serif";
    case Feature::jaggy_contour: return "jaggy_contour";
    case Feature::rounded_corner: return "rounded_corner";
    case Feature::constant_stroke: return "constant_stroke";
    case Feature::varying_stroke: return "varying_stroke";
  }
  return "?";
}

bool FeatureFlags::has(Feature f) const {
  switch (f) {
    case Feature::serif: return serif;
    case Feature::jaggy_contour: return jaggy_contour;
    case Feature::rounded_corner: return rounded_corner;
    case Feature::constant_stroke: return constant_stroke;
    case Feature::varying_stroke: return varying_stroke;
  }
  return false;
}

LabelRule LabelRule::standard() {
  LabelRule rule;
  rule.words_for_feature = {
      {Feature::serif, {"serif"}},
      {Feature::jaggy_contour, {"rough", "grunge"}},
      {Feature::rounded_corner, {"soft"}},
      {Feature::constant_stroke, {"geometric"}},
  };
  rule.fallback = {"plain"};
  return rule;
}

std::vector<std::string> LabelRule::apply(const FeatureFlags& flags) const {
  std::vector<std::string> words;
  for (const auto& [feature, ws] : words_for_feature) {
    if (flags.has(feature)) words.insert(words.end(), ws.begin(), ws.end());
  }
  if (words.empty()) words = fallback;
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  return words;
}

namespace {

struct Point {
  double x;
  double y;
};

struct Stroke {
  std::vector<Point> points;
  bool free_start;
  bool free_end;
};

std::vector<Point> arc(double cx, double cy, double r, double from_deg, double to_deg, int segments) {
  std::vector<Point> pts;
  for (int i = 0; i <= segments; ++i) {
    const double a = (from_deg + (to_deg - from_deg) * i / segments) * std::numbers::pi / 180.0;
    pts.push_back({cx + r * std::cos(a), cy - r * std::sin(a)});
  }
  return pts;
}

/// Skeletons in the unit square, y pointing down.
const std::vector<std::vector<Stroke>>& skeletons() {
  static const std::vector<std::vector<Stroke>> table = {
      // A
      {{{{0.15, 0.9}, {0.5, 0.1}, {0.85, 0.9}}, true, true}, {{{0.3, 0.6}, {0.7, 0.6}}, false, false}},
      // C
      {{arc(0.52, 0.5, 0.38, 45, 315, 18), true, true}},
      // E
      {{{{0.25, 0.1}, {0.25, 0.9}}, false, false},
       {{{0.25, 0.1}, {0.8, 0.1}}, false, true},
       {{{0.25, 0.5}, {0.7, 0.5}}, false, true},
       {{{0.25, 0.9}, {0.8, 0.9}}, false, true}},
      // H
      {{{{0.2, 0.1}, {0.2, 0.9}}, true, true},
       {{{0.8, 0.1}, {0.8, 0.9}}, true, true},
       {{{0.2, 0.5}, {0.8, 0.5}}, false, false}},
      // K
      {{{{0.25, 0.1}, {0.25, 0.9}}, true, true},
       {{{0.8, 0.1}, {0.25, 0.58}}, true, false},
       {{{0.42, 0.44}, {0.82, 0.9}}, false, true}},
      // L
      {{{{0.25, 0.1}, {0.25, 0.9}, {0.8, 0.9}}, true, true}},
      // N
      {{{{0.2, 0.9}, {0.2, 0.1}, {0.8, 0.9}, {0.8, 0.1}}, true, true}},
      // O
      {{arc(0.5, 0.5, 0.38, 0, 360, 24), false, false}},
      // T
      {{{{0.1, 0.1}, {0.9, 0.1}}, true, true}, {{{0.5, 0.1}, {0.5, 0.9}}, false, true}},
      // V
      {{{{0.15, 0.1}, {0.5, 0.9}, {0.85, 0.1}}, true, true}},
      // X
      {{{{0.15, 0.1}, {0.85, 0.9}}, true, true}, {{{0.85, 0.1}, {0.15, 0.9}}, true, true}},
      // Z
      {{{{0.15, 0.1}, {0.85, 0.1}, {0.15, 0.9}, {0.85, 0.9}}, true, true}},
  };
  return table;
}

/// Oriented box or capsule; margin() > 0 inside, measured in pixels.
struct Shape {
  Point a;
  Point b;
  double half_width;
  double cap;  // extension beyond the endpoints for square caps
  bool round;

  double margin(double px, double py) const {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len = std::hypot(dx, dy);
    const double ux = len > 0 ? dx / len : 1.0;
    const double uy = len > 0 ? dy / len : 0.0;
    const double u = (px - a.x) * ux + (py - a.y) * uy;
    const double v = -(px - a.x) * uy + (py - a.y) * ux;
    if (round) {
      const double t = std::clamp(u, 0.0, len);
      return half_width - std::hypot(u - t, v);
    }
    // Box SDF in the stroke frame.
    const double cu = u - len / 2;
    const double qx = std::abs(cu) - (len / 2 + cap);
    const double qy = std::abs(v) - half_width;
    const double outside = std::hypot(std::max(qx, 0.0), std::max(qy, 0.0));
    const double inside = std::min(std::max(qx, qy), 0.0);
    return -(outside + inside);
  }
};

double pixel_noise(std::uint64_t key, int x, int y) {
  std::uint64_t h = derive_seed(key, "jaggy", (static_cast<std::uint64_t>(y) << 32) | static_cast<std::uint32_t>(x));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

struct FontStyle {
  double slant;
  double width_scale;
  double base_width;
};

GrayImage render_glyph(const std::vector<Stroke>& strokes, const FeatureFlags& flags, const FontStyle& style,
                       int size, std::uint64_t noise_key) {
  const double margin_px = size * 0.14;
  const double box = size - 2 * margin_px;
  auto to_px = [&](Point p) {
    const double x = 0.5 + (p.x - 0.5) * style.width_scale + style.slant * (0.5 - p.y);
    return Point{margin_px + x * box, margin_px + p.y * box};
  };

  std::vector<Shape> shapes;
  for (const auto& s : strokes) {
    for (std::size_t i = 0; i + 1 < s.points.size(); ++i) {
      const Point a = to_px(s.points[i]);
      const Point b = to_px(s.points[i + 1]);
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      const double vertical = len > 0 ? std::abs(b.y - a.y) / len : 0.0;
      const double w = flags.varying_stroke ? style.base_width * (0.35 + 1.3 * vertical) : style.base_width;
      shapes.push_back({a, b, w / 2, flags.rounded_corner ? 0.0 : w / 2, flags.rounded_corner});
    }
    if (flags.serif) {
      auto add_serif = [&](Point end, Point inner) {
        const double dx = end.x - inner.x;
        const double dy = end.y - inner.y;
        const double len = std::hypot(dx, dy);
        if (len == 0) return;
        const double nx = -dy / len;
        const double ny = dx / len;
        const double half_len = style.base_width * 1.6;
        const double thick = std::max(1.2, style.base_width * 0.45);
        shapes.push_back({{end.x - nx * half_len, end.y - ny * half_len},
                          {end.x + nx * half_len, end.y + ny * half_len},
                          thick / 2,
                          flags.rounded_corner ? 0.0 : thick / 2,
                          flags.rounded_corner});
      };
      if (s.free_start) add_serif(to_px(s.points.front()), to_px(s.points[1]));
      if (s.free_end) add_serif(to_px(s.points.back()), to_px(s.points[s.points.size() - 2]));
    }
  }

  constexpr int kSuper = 4;
  GrayImage img(size, size, 255);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double noise = flags.jaggy_contour ? 1.4 * pixel_noise(noise_key, x, y) : 0.0;
      int covered = 0;
      for (int sy = 0; sy < kSuper; ++sy) {
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper;
          const double py = y + (sy + 0.5) / kSuper;
          double best = -1e9;
          for (const auto& sh : shapes) best = std::max(best, sh.margin(px, py));
          if (best + noise > 0) ++covered;
        }
      }
      img.at(x, y) = static_cast<std::uint8_t>(255 - (255 * covered + kSuper * kSuper / 2) / (kSuper * kSuper));
    }
  }
  return img;
}

}  // namespace

const std::string& synthetic_letters() {
  static const std::string letters = "ACEHKLNOTVXZ";
  return letters;
}

SyntheticFont render_synthetic_font(const SyntheticSpec& spec, std::uint64_t seed, std::size_t font_index) {
  if (spec.image_size < 32) throw UsageError("image_size must be at least 32");
  Rng rng = make_rng(seed, "synth", font_index);
  const double p = spec.feature_probability;

  SyntheticFont font;
  char id[32];
  std::snprintf(id, sizeof id, "f%04zu", font_index);
  font.font_id = id;
  font.flags.serif = uniform01(rng) < p;
  font.flags.jaggy_contour = uniform01(rng) < p;
  font.flags.rounded_corner = uniform01(rng) < p;
  font.flags.constant_stroke = uniform01(rng) < p;
  font.flags.varying_stroke = !font.flags.constant_stroke;
  font.words = spec.label_rule.apply(font.flags);

  FontStyle style;
  style.slant = (uniform01(rng) - 0.5) * 0.3;
  style.width_scale = 0.85 + 0.15 * uniform01(rng);
  style.base_width = spec.image_size * (0.06 + 0.04 * uniform01(rng));

  const auto& letters = synthetic_letters();
  for (std::size_t g = 0; g < spec.glyphs_per_font; ++g) {
    const std::size_t li = g % letters.size();
    GlyphImage glyph;
    glyph.font_id = font.font_id;
    glyph.letter = static_cast<char32_t>(letters[li]);
    glyph.image = render_glyph(skeletons()[li], font.flags, style, spec.image_size,
                               derive_seed(seed, font.font_id, g));
    font.glyphs.push_back(std::move(glyph));
  }
  return font;
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed, const fs::path& out_dir) {
  if (spec.image_size < 32) throw UsageError("image_size must be at least 32");
  if (spec.feature_probability < 0 || spec.feature_probability > 1) {
    throw UsageError("feature_probability must lie in [0, 1]");
  }
  SyntheticDataset out;
  out.fonts.resize(spec.n_fonts);
  parallel_for(spec.n_fonts, [&](std::size_t i) {
    out.fonts[i] = render_synthetic_font(spec, seed, i);
    const fs::path dir = out_dir / "images" / out.fonts[i].font_id;
    fs::create_directories(dir);
    for (std::size_t g = 0; g < out.fonts[i].glyphs.size(); ++g) {
      char name[32];
      std::snprintf(name, sizeof name, "%02zu_%c.pgm", g, static_cast<char>(out.fonts[i].glyphs[g].letter));
      write_pgm(dir / name, out.fonts[i].glyphs[g].image);
    }
  });

  std::ostringstream manifest;
  std::ostringstream truth;
  truth << "font_id\tserif\tjaggy_contour\trounded_corner\tconstant_stroke\tvarying_stroke\n";
  for (const auto& f : out.fonts) {
    manifest << f.font_id << "\tSynthetic " << f.font_id.substr(1) << '\t';
    for (std::size_t i = 0; i < f.words.size(); ++i) manifest << (i ? "," : "") << f.words[i];
    manifest << "\timages/" << f.font_id << "/*.pgm\n";
    truth << f.font_id << '\t' << f.flags.serif << '\t' << f.flags.jaggy_contour << '\t' << f.flags.rounded_corner
          << '\t' << f.flags.constant_stroke << '\t' << f.flags.varying_stroke << '\n';
  }
  fs::create_directories(out_dir);
  out.manifest = out_dir / "manifest.tsv";
  out.truth = out_dir / "truth.tsv";
  write_text_file(out.manifest, manifest.str());
  write_text_file(out.truth, truth.str());
  return out;
}

std::map<std::string, FeatureFlags> read_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open truth file " + path.string());
  std::map<std::string, FeatureFlags> out;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string id;
    FeatureFlags f;
    row >> id >> f.serif >> f.jaggy_contour >> f.rounded_corner >> f.constant_stroke >> f.varying_stroke;
    if (!row) throw DataError(path.string() + ": malformed row for " + id);
    out.emplace(id, f);
  }
  return out;
}

}  // namespace fontparts::dataset
