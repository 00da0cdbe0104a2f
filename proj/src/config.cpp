#include "fontparts/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <sstream>

#include "fontparts/binary_io.hpp"
#include "fontparts/common.hpp"

namespace fontparts {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  T value{};
  const auto* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(t.data(), end, value);
  if (ec != std::errc() || ptr != end || t.empty()) {
    throw UsageError("config key " + key + ": cannot parse \"" + text + "\"");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw UsageError("config key " + key + ": expected true or false, got \"" + text + "\"");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Entry {
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

template <typename T, typename Access>
Entry number_entry(Access access) {
  Entry e;
  e.get = [access](const PipelineConfig& c) {
    const T v = access(const_cast<PipelineConfig&>(c));
    if constexpr (std::is_floating_point_v<T>) {
      return format_double(v);
    } else {
      return std::to_string(v);
    }
  };
  e.set = [access](PipelineConfig& c, const std::string& key, const std::string& text) {
    access(c) = parse_number<T>(key, text);
  };
  return e;
}

template <typename Access>
Entry bool_entry(Access access) {
  return {[access](const PipelineConfig& c) {
            return std::string(access(const_cast<PipelineConfig&>(c)) ? "true" : "false");
          },
          [access](PipelineConfig& c, const std::string& key, const std::string& text) {
            access(c) = parse_bool(key, text);
          }};
}

template <typename Access>
Entry path_entry(Access access) {
  return {[access](const PipelineConfig& c) { return access(const_cast<PipelineConfig&>(c)).string(); },
          [access](PipelineConfig& c, const std::string&, const std::string& text) { access(c) = trim(text); }};
}

#define FP_FIELD(expr) [](PipelineConfig& c) -> auto& { return c.expr; }

// Ordered by section then key; this order is also the to_ini() order.
const std::vector<std::pair<std::string, Entry>>& registry() {
  static const std::vector<std::pair<std::string, Entry>> entries = [] {
    std::vector<std::pair<std::string, Entry>> r;
    r.emplace_back("general.seed", number_entry<std::uint64_t>(FP_FIELD(seed)));
    r.emplace_back("general.threads", number_entry<unsigned>(FP_FIELD(threads)));
    r.emplace_back("paths.manifest", path_entry(FP_FIELD(manifest)));
    r.emplace_back("paths.work_dir", path_entry(FP_FIELD(work_dir)));
    r.emplace_back("paths.split_file", path_entry(FP_FIELD(split_file)));
    r.emplace_back("synth.n_fonts", number_entry<std::size_t>(FP_FIELD(synth.n_fonts)));
    r.emplace_back("synth.glyphs_per_font", number_entry<std::size_t>(FP_FIELD(synth.glyphs_per_font)));
    r.emplace_back("synth.image_size", number_entry<int>(FP_FIELD(synth.image_size)));
    r.emplace_back("synth.feature_probability", number_entry<double>(FP_FIELD(synth.feature_probability)));
    r.emplace_back("dataset.min_fonts", number_entry<std::size_t>(FP_FIELD(min_fonts)));
    r.emplace_back("dataset.train_ratio", number_entry<double>(FP_FIELD(split.train)));
    r.emplace_back("dataset.val_ratio", number_entry<double>(FP_FIELD(split.val)));
    r.emplace_back("dataset.test_ratio", number_entry<double>(FP_FIELD(split.test)));
    r.emplace_back("sift.n_octaves", number_entry<int>(FP_FIELD(sift.n_octaves)));
    r.emplace_back("sift.scales_per_octave", number_entry<int>(FP_FIELD(sift.scales_per_octave)));
    r.emplace_back("sift.base_sigma", number_entry<double>(FP_FIELD(sift.base_sigma)));
    r.emplace_back("sift.contrast_threshold", number_entry<double>(FP_FIELD(sift.contrast_threshold)));
    r.emplace_back("sift.edge_ratio", number_entry<double>(FP_FIELD(sift.edge_ratio)));
    r.emplace_back("sift.upsample", bool_entry(FP_FIELD(sift.upsample)));
    r.emplace_back("sift.target_height", number_entry<int>(FP_FIELD(sift.target_height)));
    r.emplace_back("sift.border", number_entry<double>(FP_FIELD(sift.border)));
    r.emplace_back("train.descriptors_per_font", number_entry<std::size_t>(FP_FIELD(train.descriptors_per_font)));
    r.emplace_back("train.fonts_per_batch", number_entry<std::size_t>(FP_FIELD(train.fonts_per_batch)));
    r.emplace_back("train.learning_rate", number_entry<double>(FP_FIELD(train.learning_rate)));
    r.emplace_back("train.beta1", number_entry<double>(FP_FIELD(train.beta1)));
    r.emplace_back("train.beta2", number_entry<double>(FP_FIELD(train.beta2)));
    r.emplace_back("train.epsilon", number_entry<double>(FP_FIELD(train.epsilon)));
    r.emplace_back("train.epochs", number_entry<int>(FP_FIELD(train.epochs)));
    r.emplace_back("train.patience", number_entry<int>(FP_FIELD(train.patience)));
    r.emplace_back("predict.n_repeats", number_entry<std::size_t>(FP_FIELD(predict.n_repeats)));
    r.emplace_back("predict.descriptors_per_font", number_entry<std::size_t>(FP_FIELD(predict.descriptors_per_font)));
    r.emplace_back("codebook.q", number_entry<int>(FP_FIELD(codebook_size)));
    r.emplace_back("codebook.sample_size", number_entry<std::size_t>(FP_FIELD(codebook_sample)));
    r.emplace_back("codebook.max_iter", number_entry<int>(FP_FIELD(kmeans_max_iter)));
    r.emplace_back("codebook.tol", number_entry<double>(FP_FIELD(kmeans_tol)));
    r.emplace_back("analysis.row_clusters", number_entry<int>(FP_FIELD(row_clusters)));
    r.emplace_back("analysis.col_clusters", number_entry<int>(FP_FIELD(col_clusters)));
    r.emplace_back("analysis.n_singular_vectors", number_entry<int>(FP_FIELD(n_singular_vectors)));
    r.emplace_back("analysis.peak_top_n", number_entry<std::size_t>(FP_FIELD(peak_top_n)));
    r.emplace_back("analysis.peak_min_value", number_entry<double>(FP_FIELD(peak_min_value)));
    r.emplace_back("analysis.neighbors", number_entry<std::size_t>(FP_FIELD(neighbors)));
    r.emplace_back("analysis.similarity",
                   Entry{[](const PipelineConfig& c) {
                           return std::string(c.similarity == analysis::SimilarityBasis::delta ? "delta"
                                                                                               : "histogram");
                         },
                         [](PipelineConfig& c, const std::string& key, const std::string& text) {
                           const auto t = trim(text);
                           if (t == "histogram") {
                             c.similarity = analysis::SimilarityBasis::histogram;
                           } else if (t == "delta") {
                             c.similarity = analysis::SimilarityBasis::delta;
                           } else {
                             throw UsageError("config key " + key + ": expected histogram or delta");
                           }
                         }});
    r.emplace_back("eval.table_size", number_entry<std::size_t>(FP_FIELD(table_size)));
    return r;
  }();
  return entries;
}

#undef FP_FIELD

void require(bool ok, const std::string& key, const std::string& rule) {
  if (!ok) throw UsageError("config key " + key + " " + rule);
}

}  // namespace

void PipelineConfig::set(const std::string& dotted_key, const std::string& value) {
  for (const auto& [key, entry] : registry()) {
    if (key == dotted_key) {
      entry.set(*this, key, value);
      return;
    }
  }
  throw UsageError("unknown config key " + dotted_key);
}

void PipelineConfig::validate() const {
  require(synth.image_size >= 32, "synth.image_size", "must be at least 32");
  require(synth.glyphs_per_font >= 1, "synth.glyphs_per_font", "must be at least 1");
  require(synth.feature_probability >= 0 && synth.feature_probability <= 1, "synth.feature_probability",
          "must lie in [0, 1]");
  require(min_fonts >= 1, "dataset.min_fonts", "must be at least 1");
  require(split.train > 0 && split.val > 0 && split.test > 0, "dataset.*_ratio", "must be positive");
  require(std::abs(split.train + split.val + split.test - 1.0) < 1e-9, "dataset.*_ratio", "must sum to 1");
  require(sift.n_octaves >= 0 && sift.n_octaves <= 8, "sift.n_octaves", "must lie in [0, 8]");
  require(sift.scales_per_octave >= 2 && sift.scales_per_octave <= 8, "sift.scales_per_octave",
          "must lie in [2, 8]");
  require(sift.base_sigma > 0.5, "sift.base_sigma", "must exceed 0.5");
  require(sift.contrast_threshold >= 0, "sift.contrast_threshold", "must be non-negative");
  require(sift.edge_ratio > 1, "sift.edge_ratio", "must exceed 1");
  require(sift.target_height == 0 || sift.target_height >= 16, "sift.target_height", "must be 0 or at least 16");
  require(sift.border >= 0, "sift.border", "must be non-negative");
  try {
    train.validate();
  } catch (const Error& e) {
    throw UsageError(std::string("train: ") + e.what());
  }
  require(predict.n_repeats >= 1, "predict.n_repeats", "must be at least 1");
  require(predict.descriptors_per_font >= 1, "predict.descriptors_per_font", "must be at least 1");
  require(codebook_size >= 2, "codebook.q", "must be at least 2");
  require(codebook_sample >= static_cast<std::size_t>(codebook_size), "codebook.sample_size", "must be at least q");
  require(kmeans_max_iter >= 1, "codebook.max_iter", "must be at least 1");
  require(kmeans_tol >= 0, "codebook.tol", "must be non-negative");
  require(row_clusters >= 2, "analysis.row_clusters", "must be at least 2");
  require(col_clusters >= 2, "analysis.col_clusters", "must be at least 2");
  require(n_singular_vectors >= 1, "analysis.n_singular_vectors", "must be at least 1");
  require(peak_top_n >= 1, "analysis.peak_top_n", "must be at least 1");
  require(neighbors >= 1, "analysis.neighbors", "must be at least 1");
  require(table_size >= 1, "eval.table_size", "must be at least 1");
}

std::string PipelineConfig::to_ini() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [key, entry] : registry()) {
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out << '\n';
      out << '[' << sec << "]\n";
      section = sec;
    }
    out << key.substr(dot + 1) << " = " << entry.get(*this) << '\n';
  }
  return out.str();
}

PipelineConfig parse_config(const std::string& ini_text, const std::string& source) {
  boost::property_tree::ptree tree;
  std::istringstream in(ini_text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError(source + ": line " + std::to_string(e.line()) + ": " + e.message());
  }
  PipelineConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw UsageError(source + ": key " + section + " outside a section");
    for (const auto& [key, value] : body) {
      try {
        config.set(section + "." + key, value.data());
      } catch (const UsageError& e) {
        throw UsageError(source + ": " + e.what());
      }
    }
  }
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  PipelineConfig config;
  if (!path.empty()) {
    std::string text;
    try {
      text = read_text_file(path);
    } catch (const Error& e) {
      throw UsageError(std::string("cannot read config: ") + e.what());
    }
    config = parse_config(text, path.string());
  }
  if (const char* env = std::getenv("FONTPARTS_WORK_DIR"); env && *env) config.work_dir = env;
  return config;
}

}  // namespace fontparts
