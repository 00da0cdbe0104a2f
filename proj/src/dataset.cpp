#include "fontparts/dataset.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fontparts/common.hpp"

namespace fontparts::dataset {

namespace fs = std::filesystem;

ImpressionVocabulary::ImpressionVocabulary(const std::map<std::string, std::size_t>& frequencies) {
  for (const auto& [word, count] : frequencies) {
    index_.emplace(word, words_.size());
    words_.push_back(word);
    frequency_.push_back(count);
  }
}

std::optional<std::size_t> ImpressionVocabulary::index_of(const std::string& word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::unassigned: break;
  }
  return "unassigned";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw DataError("unknown split \"" + s + "\"");
}

namespace {

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".pgm";
}

std::vector<fs::path> resolve_glyph_source(const fs::path& base, const std::string& source) {
  fs::path full = fs::path(source).is_absolute() ? fs::path(source) : base / source;
  std::vector<fs::path> out;
  if (fs::is_directory(full)) {
    for (const auto& entry : fs::directory_iterator(full)) {
      if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
    }
  } else if (source.find_first_of("*?[") != std::string::npos) {
    const fs::path dir = full.parent_path();
    const std::string pattern = full.filename().string();
    if (fs::is_directory(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() &&
            fnmatch(pattern.c_str(), entry.path().filename().c_str(), 0) == 0) {
          out.push_back(entry.path());
        }
      }
    }
  } else if (fs::exists(full)) {
    out.push_back(full);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Last code point of the file stem, decoded from UTF-8.
char32_t letter_from_path(const fs::path& p) {
  const std::string stem = p.stem().string();
  if (stem.empty()) return 0;
  std::size_t i = stem.size() - 1;
  while (i > 0 && (static_cast<unsigned char>(stem[i]) & 0xC0) == 0x80) --i;
  const auto lead = static_cast<unsigned char>(stem[i]);
  if (lead < 0x80) return lead;
  int extra = lead >= 0xF0 ? 3 : lead >= 0xE0 ? 2 : 1;
  char32_t cp = lead & (0x3F >> extra);
  for (int k = 1; k <= extra && i + k < stem.size(); ++k) {
    cp = (cp << 6) | (static_cast<unsigned char>(stem[i + k]) & 0x3F);
  }
  return cp;
}

std::string letter_label(char32_t c) {
  if (c < 0x80 && c >= 0x20) return std::string(1, static_cast<char>(c));
  return "U+" + std::to_string(static_cast<unsigned>(c));
}

}  // namespace

Dataset parse_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();

  std::vector<FontRecord> records;
  std::vector<std::vector<std::string>> words_per_record;
  std::map<std::string, std::size_t> frequency;
  std::set<std::string> seen_ids;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 4) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    FontRecord rec;
    rec.font_id = trim(fields[0]);
    rec.name = trim(fields[1]);
    rec.glyph_source = trim(fields[3]);
    if (rec.font_id.empty()) throw DataError(path.string() + ":" + std::to_string(line_no) + ": empty font_id");
    if (!seen_ids.insert(rec.font_id).second) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate font_id " + rec.font_id);
    }
    std::set<std::string> words;
    for (const auto& w : split_on(fields[2], ',')) {
      auto t = trim(w);
      if (!t.empty()) words.insert(t);
    }
    for (const auto& w : words) ++frequency[w];
    rec.glyph_paths = resolve_glyph_source(base, rec.glyph_source);
    if (rec.glyph_paths.empty()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": font " + rec.font_id +
                      " has no glyph images at " + rec.glyph_source);
    }
    words_per_record.emplace_back(words.begin(), words.end());
    records.push_back(std::move(rec));
  }

  Dataset out;
  out.vocabulary = ImpressionVocabulary(frequency);
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& w : words_per_record[i]) records[i].impressions.push_back(*out.vocabulary.index_of(w));
    std::sort(records[i].impressions.begin(), records[i].impressions.end());
  }
  out.records = std::move(records);
  return out;
}

void load_glyphs(FontRecord& record) {
  record.glyphs.clear();
  record.glyphs.reserve(record.glyph_paths.size());
  for (const auto& p : record.glyph_paths) {
    const char32_t letter = letter_from_path(p);
    GlyphImage g;
    g.font_id = record.font_id;
    g.letter = letter;
    try {
      g.image = read_gray_image(p);
    } catch (const DataError& e) {
      throw DataError("font " + record.font_id + ", letter " + letter_label(letter) + ": " + e.what());
    }
    normalize_polarity(g.image);
    record.glyphs.push_back(std::move(g));
  }
}

Dataset load_manifest(const fs::path& path) {
  Dataset ds = parse_manifest(path);
  parallel_for(ds.records.size(), [&](std::size_t i) { load_glyphs(ds.records[i]); });
  return ds;
}

Dataset filter_vocabulary(const Dataset& input, std::size_t min_fonts) {
  if (min_fonts < 1) throw UsageError("min_fonts must be at least 1");
  std::vector<std::size_t> counts(input.vocabulary.size(), 0);
  for (const auto& r : input.records) {
    for (auto k : r.impressions) {
      if (k >= counts.size()) throw DataError("font " + r.font_id + " references unknown impression index");
      ++counts[k];
    }
  }
  std::map<std::string, std::size_t> kept;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] >= min_fonts) kept.emplace(input.vocabulary.word(k), counts[k]);
  }
  if (kept.empty()) throw DataError("empty vocabulary");

  Dataset out;
  out.vocabulary = ImpressionVocabulary(kept);
  for (const auto& r : input.records) {
    FontRecord copy = r;
    copy.impressions.clear();
    for (auto k : r.impressions) {
      if (auto idx = out.vocabulary.index_of(input.vocabulary.word(k))) copy.impressions.push_back(*idx);
    }
    std::sort(copy.impressions.begin(), copy.impressions.end());
    if (!copy.impressions.empty()) out.records.push_back(std::move(copy));
  }
  return out;
}

std::vector<FontRecord> split_records(std::vector<FontRecord> records, const SplitRatios& ratios,
                                      std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.val > 0 && ratios.test > 0)) {
    throw UsageError("split ratios must all be positive");
  }
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw UsageError("split ratios must sum to 1");
  }
  const std::size_t n = records.size();
  if (n < 3) throw DataError("need at least 3 fonts to split, got " + std::to_string(n));

  std::array<std::size_t, 3> counts = {
      static_cast<std::size_t>(std::llround(ratios.train * n)),
      static_cast<std::size_t>(std::llround(ratios.val * n)),
      0,
  };
  if (counts[0] + counts[1] > n) counts[1] = n - counts[0];
  counts[2] = n - counts[0] - counts[1];
  for (std::size_t s = 0; s < 3; ++s) {
    if (counts[s] == 0) {
      auto donor = std::max_element(counts.begin(), counts.end());
      --*donor;
      counts[s] = 1;
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);

  constexpr std::array<Split, 3> kinds = {Split::train, Split::val, Split::test};
  std::size_t pos = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t c = 0; c < counts[s]; ++c) records[order[pos++]].split = kinds[s];
  }
  return records;
}

std::vector<FontRecord> apply_split_file(std::vector<FontRecord> records, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file " + path.string());
  std::map<std::string, Split> assignment;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    const auto fields = split_on(line, '\t');
    if (fields.size() != 2) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected font_id<TAB>split");
    }
    try {
      assignment[trim(fields[0])] = parse_split(trim(fields[1]));
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  for (auto& r : records) {
    auto it = assignment.find(r.font_id);
    if (it == assignment.end()) throw DataError("split file " + path.string() + " has no entry for " + r.font_id);
    r.split = it->second;
  }
  return records;
}

LabelVector to_multi_hot(const FontRecord& record, std::size_t num_labels) {
  LabelVector t(num_labels, 0.0);
  for (auto k : record.impressions) {
    if (k >= num_labels) {
      throw DataError("font " + record.font_id + ": impression index " + std::to_string(k) +
                      " outside vocabulary of size " + std::to_string(num_labels));
    }
    t[k] = 1.0;
  }
  return t;
}

}  // namespace fontparts::dataset
