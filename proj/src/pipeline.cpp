#include "fontparts/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

#include "fontparts/analysis.hpp"
#include "fontparts/binary_io.hpp"
#include "fontparts/checkpoint.hpp"
#include "fontparts/codebook.hpp"
#include "fontparts/common.hpp"
#include "fontparts/deepsets.hpp"
#include "fontparts/descriptor_io.hpp"
#include "fontparts/eval.hpp"
#include "fontparts/synthetic.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace fontparts::pipeline {

namespace {

std::ostream* g_log = &std::cerr;
std::mutex g_log_mutex;

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string full(double v) { return fmt("%.17g", v); }

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

void require_file(const fs::path& path, const std::string& stage) {
  if (!fs::exists(path)) {
    throw DataError("missing " + path.string() + "; run `fontparts " + stage + "` first");
  }
}

void write_json(const fs::path& path, const ojson& j) { write_text_file(path, j.dump(2) + "\n"); }

ojson read_json(const fs::path& path) {
  try {
    return ojson::parse(read_text_file(path));
  } catch (const ojson::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

fs::path manifest_path(const PipelineConfig& config, const Layout& layout) {
  return config.manifest.empty() ? layout.synth_manifest() : config.manifest;
}

std::string sift_fingerprint(const sift::SiftParams& p) {
  std::ostringstream out;
  out << "n_octaves = " << p.n_octaves << "\nscales_per_octave = " << p.scales_per_octave
      << "\nbase_sigma = " << full(p.base_sigma) << "\ncontrast_threshold = " << full(p.contrast_threshold)
      << "\nedge_ratio = " << full(p.edge_ratio) << "\nupsample = " << (p.upsample ? "true" : "false")
      << "\ntarget_height = " << p.target_height << "\nborder = " << full(p.border) << '\n';
  return out.str();
}

std::vector<sift::DescriptorSet> load_sets(const Layout& layout, const std::vector<FontEntry>& fonts) {
  std::vector<sift::DescriptorSet> sets(fonts.size());
  parallel_for(fonts.size(), [&](std::size_t i) {
    const auto path = layout.cache_file(fonts[i].font_id);
    require_file(path, "extract");
    sets[i] = sift::load_descriptor_set(path);
  });
  return sets;
}

Eigen::VectorXd multi_hot(const FontEntry& font, std::size_t k) {
  Eigen::VectorXd t = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  for (auto i : font.impressions) t[static_cast<Eigen::Index>(i)] = 1.0;
  return t;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd predict_font(const Eigen::MatrixXd& descriptors, const deepsets::MlpParams& params,
                             const deepsets::PredictConfig& config) {
  if (descriptors.cols() == 0) {
    return deepsets::f_forward(params, Eigen::VectorXd::Zero(deepsets::kEmbedDim));
  }
  return deepsets::predict(descriptors, params, config);
}

}  // namespace

void set_log_stream(std::ostream* out) { g_log = out; }

void log(const std::string& line) {
  if (!g_log) return;
  std::lock_guard lock(g_log_mutex);
  *g_log << line << '\n';
}

DatasetTable read_dataset_table(const Layout& layout) {
  require_file(layout.fonts_table(), "extract");
  require_file(layout.vocabulary_table(), "extract");
  DatasetTable table;
  {
    std::istringstream in(read_text_file(layout.vocabulary_table()));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = split_on(line, '\t');
      if (f.size() != 3) throw DataError(layout.vocabulary_table().string() + ": malformed line");
      table.words.push_back(f[1]);
      table.frequencies.push_back(std::stoull(f[2]));
    }
  }
  std::istringstream in(read_text_file(layout.fonts_table()));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_on(line, '\t');
    if (f.size() != 3) throw DataError(layout.fonts_table().string() + ": malformed line");
    FontEntry e{f[0], dataset::parse_split(f[1]), {}};
    for (const auto& w : split_on(f[2], ',')) {
      auto it = std::find(table.words.begin(), table.words.end(), w);
      if (it == table.words.end()) throw DataError("font " + e.font_id + " has unknown impression " + w);
      e.impressions.push_back(static_cast<std::size_t>(it - table.words.begin()));
    }
    table.fonts.push_back(std::move(e));
  }
  return table;
}

int cmd_synth(const PipelineConfig& config) {
  config.validate();
  Layout layout{config.work_dir};
  const auto data = dataset::generate_synthetic(config.synth, config.seed, layout.synth_dir());
  log("synth: wrote " + std::to_string(data.fonts.size()) + " fonts to " + layout.synth_dir().string());
  return 0;
}

int cmd_extract(const PipelineConfig& config) {
  config.validate();
  Layout layout{config.work_dir};
  const auto manifest = manifest_path(config, layout);
  if (!fs::exists(manifest)) {
    throw DataError("manifest not found: " + manifest.string() + "; run `fontparts synth` or set paths.manifest");
  }
  auto ds = dataset::parse_manifest(manifest);
  if (ds.records.empty()) throw DataError("manifest lists no fonts");
  ds = dataset::filter_vocabulary(ds, config.min_fonts);
  auto records = config.split_file.empty()
                     ? dataset::split_records(std::move(ds.records), config.split, derive_seed(config.seed, "split"))
                     : dataset::apply_split_file(std::move(ds.records), config.split_file);

  fs::create_directories(layout.cache_dir());
  const std::string fingerprint = sift_fingerprint(config.sift);
  bool force = true;
  if (fs::exists(layout.cache_params())) force = read_text_file(layout.cache_params()) != fingerprint;
  if (force) write_text_file(layout.cache_params(), fingerprint);

  const auto manifest_time = fs::last_write_time(manifest);
  std::vector<std::string> failures(records.size());
  std::vector<char> reused(records.size(), 0);
  parallel_for(records.size(), [&](std::size_t i) {
    auto& rec = records[i];
    const auto cache = layout.cache_file(rec.font_id);
    if (!force && fs::exists(cache)) {
      const auto cache_time = fs::last_write_time(cache);
      bool fresh = cache_time > manifest_time;
      for (const auto& p : rec.glyph_paths) {
        std::error_code ec;
        const auto t = fs::last_write_time(p, ec);
        if (ec || !(cache_time > t)) fresh = false;
      }
      if (fresh) {
        reused[i] = 1;
        return;
      }
    }
    try {
      dataset::load_glyphs(rec);
      const auto set = sift::extract_font_descriptors(rec, config.sift);
      rec.glyphs.clear();
      sift::save_descriptor_set(cache, set);
    } catch (const Error& e) {
      failures[i] = e.what();
      std::error_code ec;
      fs::remove(cache, ec);
    }
  });

  std::ostringstream fonts;
  std::ostringstream failed;
  fonts << "font_id\tsplit\timpressions\n";
  failed << "font_id\terror\n";
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  std::size_t n_reused = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (!failures[i].empty()) {
      std::cerr << "error: extract: " << rec.font_id << " failed: " << failures[i] << '\n';
      failed << rec.font_id << '\t' << failures[i] << '\n';
      ++n_failed;
      continue;
    }
    ++n_ok;
    n_reused += reused[i];
    fonts << rec.font_id << '\t' << dataset::to_string(rec.split) << '\t';
    for (std::size_t j = 0; j < rec.impressions.size(); ++j) {
      fonts << (j ? "," : "") << ds.vocabulary.word(rec.impressions[j]);
    }
    fonts << '\n';
  }
  if (n_ok == 0) throw DataError("descriptor extraction failed for every font");
  std::ostringstream vocab;
  vocab << "index\tword\tfrequency\n";
  for (std::size_t k = 0; k < ds.vocabulary.size(); ++k) {
    vocab << k << '\t' << ds.vocabulary.word(k) << '\t' << ds.vocabulary.frequency(k) << '\n';
  }
  write_text_file(layout.fonts_table(), fonts.str());
  write_text_file(layout.vocabulary_table(), vocab.str());
  write_text_file(layout.extract_log(), failed.str());
  log("extract: " + std::to_string(n_ok) + " fonts cached (" + std::to_string(n_reused) + " reused), " +
      std::to_string(n_failed) + " failed, K = " + std::to_string(ds.vocabulary.size()));
  return n_failed ? 2 : 0;
}

int cmd_train(const PipelineConfig& config, bool resume) {
  config.validate();
  Layout layout{config.work_dir};
  const auto table = read_dataset_table(layout);
  const std::size_t k = table.words.size();
  const auto sets = load_sets(layout, table.fonts);
  std::vector<deepsets::TrainingFont> train_fonts;
  std::vector<deepsets::TrainingFont> val_fonts;
  for (std::size_t i = 0; i < table.fonts.size(); ++i) {
    const auto& f = table.fonts[i];
    if (f.split != dataset::Split::train && f.split != dataset::Split::val) continue;
    deepsets::TrainingFont tf{f.font_id, deepsets::descriptor_matrix(sets[i]), multi_hot(f, k)};
    (f.split == dataset::Split::train ? train_fonts : val_fonts).push_back(std::move(tf));
  }
  if (train_fonts.empty()) throw DataError("empty train split");

  auto tc = config.train;
  tc.seed = derive_seed(config.seed, "train");
  std::optional<deepsets::TrainState> previous;
  if (resume && fs::exists(layout.train_state())) {
    previous = deepsets::load_train_state(layout.train_state());
    log("train: resuming after epoch " + std::to_string(previous->epochs_done));
  }
  fs::create_directories(layout.checkpoint().parent_path());
  std::size_t skipped = 0;
  const auto state = deepsets::train(
      train_fonts, val_fonts, k, tc, previous ? &*previous : nullptr,
      [&](const deepsets::TrainState& s) {
        deepsets::save_train_state(layout.train_state(), s);
        const auto& e = s.history.back();
        log("train: epoch " + std::to_string(e.epoch) + " train " + fmt("%.6f", e.train_loss) + " val " +
            fmt("%.6f", e.val_loss));
      },
      &skipped);
  if (skipped) log("train: skipped " + std::to_string(skipped) + " fonts without descriptors");
  deepsets::save_train_state(layout.train_state(), state);
  deepsets::save_checkpoint(layout.checkpoint(), state.best_epoch > 0 ? state.best : state.params);

  std::ostringstream out;
  out << "epoch,train_loss,val_loss,seconds\n";
  for (const auto& e : state.history) {
    out << e.epoch << ',' << full(e.train_loss) << ',' << full(e.val_loss) << ',' << fmt("%.3f", e.seconds) << '\n';
  }
  write_text_file(layout.train_log(), out.str());
  log("train: best epoch " + std::to_string(state.best_epoch) + " val loss " + fmt("%.6f", state.best_val));
  return 0;
}

int cmd_codebook(const PipelineConfig& config) {
  config.validate();
  Layout layout{config.work_dir};
  const auto table = read_dataset_table(layout);
  const auto sets = load_sets(layout, table.fonts);
  const auto sample =
      codebook::sample_descriptors(sets, config.codebook_sample, derive_seed(config.seed, "codebook-sample"));
  codebook::FitReport report;
  const auto cb = codebook::kmeans_fit(sample, config.codebook_size, derive_seed(config.seed, "codebook"),
                                       config.kmeans_max_iter, config.kmeans_tol, &report);
  codebook::save_codebook(layout.codebook(), cb);
  std::ostringstream out;
  out << "iteration,objective\n";
  for (std::size_t i = 0; i < report.objective_history.size(); ++i) {
    out << i << ',' << full(report.objective_history[i]) << '\n';
  }
  write_text_file(layout.kmeans_log(), out.str());
  log("codebook: Q = " + std::to_string(cb.size()) + " from " + std::to_string(sample.cols()) +
      " descriptors, " + std::to_string(report.iterations) + " iterations");
  return 0;
}

int cmd_analyze(const PipelineConfig& config) {
  config.validate();
  Layout layout{config.work_dir};
  const auto table = read_dataset_table(layout);
  require_file(layout.checkpoint(), "train");
  require_file(layout.codebook(), "codebook");
  const auto params = deepsets::load_checkpoint(layout.checkpoint());
  const auto cb = codebook::load_codebook(layout.codebook());
  const std::size_t k_count = table.words.size();
  if (params.num_labels() != k_count) {
    throw DataError("checkpoint has K = " + std::to_string(params.num_labels()) + " but the dataset has " +
                    std::to_string(k_count) + "; rerun `fontparts train`");
  }
  const auto sets = load_sets(layout, table.fonts);
  const std::size_t q_count = static_cast<std::size_t>(cb.size());

  std::vector<codebook::WeightedHistogram> font_hists(table.fonts.size());
  parallel_for(table.fonts.size(), [&](std::size_t i) {
    font_hists[i] = codebook::font_histogram(deepsets::descriptor_matrix(sets[i]), params, cb, table.fonts[i].font_id);
  });

  std::vector<codebook::WeightedHistogram> imp_hists;
  for (std::size_t k = 0; k < k_count; ++k) {
    std::vector<codebook::WeightedHistogram> members;
    for (std::size_t i = 0; i < table.fonts.size(); ++i) {
      const auto& imp = table.fonts[i].impressions;
      if (std::find(imp.begin(), imp.end(), k) != imp.end()) members.push_back(font_hists[i]);
    }
    if (members.empty()) {
      log("analyze: impression " + table.words[k] + " has no fonts; its histogram is zero");
      imp_hists.push_back({table.words[k], std::vector<double>(q_count, 0.0)});
    } else {
      imp_hists.push_back(codebook::impression_histogram(members, table.words[k]));
    }
  }
  const auto average = codebook::average_histogram(imp_hists);
  std::vector<codebook::DeltaHistogram> deltas;
  std::vector<codebook::WeightedHistogram> delta_rows;
  for (std::size_t k = 0; k < k_count; ++k) {
    deltas.push_back(codebook::delta_histogram(imp_hists[k], average, k));
    delta_rows.push_back({table.words[k], deltas.back().bins});
  }

  fs::create_directories(layout.analysis_dir());
  write_text_file(layout.font_histograms(), codebook::format_histogram_csv(font_hists));
  write_text_file(layout.impression_histograms(), codebook::format_histogram_csv(imp_hists));
  write_text_file(layout.average_histogram(), codebook::format_histogram_csv(std::span(&average, 1)));
  write_text_file(layout.delta_histograms(), codebook::format_histogram_csv(delta_rows));

  ojson peaks;
  peaks["top_n"] = config.peak_top_n;
  peaks["min_value"] = config.peak_min_value;
  peaks["impressions"] = ojson::object();
  ojson parts = ojson::object();
  for (std::size_t k = 0; k < k_count; ++k) {
    const auto found = codebook::find_peaks(deltas[k].bins, config.peak_top_n, config.peak_min_value);
    ojson list = ojson::array();
    std::vector<int> bins;
    for (const auto& p : found) {
      list.push_back({{"bin", p.q}, {"value", p.value}});
      bins.push_back(p.q);
    }
    peaks["impressions"][table.words[k]] = list;

    ojson fonts = ojson::object();
    if (!bins.empty()) {
      for (std::size_t i = 0; i < table.fonts.size(); ++i) {
        const auto& imp = table.fonts[i].impressions;
        if (std::find(imp.begin(), imp.end(), k) == imp.end()) continue;
        ojson locs = ojson::array();
        for (const auto& loc : codebook::locate_parts(sets[i], bins, cb)) {
          locs.push_back({{"glyph", loc.glyph_index}, {"x", loc.x}, {"y", loc.y}, {"sigma", loc.sigma}, {"bin", loc.q}});
        }
        fonts[table.fonts[i].font_id] = locs;
      }
    }
    parts[table.words[k]] = {{"peak_bins", bins}, {"fonts", fonts}};
  }
  write_json(layout.peaks(), peaks);
  write_json(layout.part_locations(), parts);

  ojson bic;
  const int r = std::min<int>(config.row_clusters, static_cast<int>(q_count));
  const int c = std::min<int>(config.col_clusters, static_cast<int>(k_count));
  if (r != config.row_clusters || c != config.col_clusters) {
    log("analyze: bicluster counts clamped to " + std::to_string(r) + " x " + std::to_string(c));
  }
  if (c < 2) {
    bic["skipped"] = "fewer than 2 impressions";
    log("analyze: biclustering skipped, fewer than 2 impressions");
  } else {
    const auto matrix = analysis::build_delta_matrix(deltas);
    analysis::BiclusterOptions opt;
    opt.row_clusters = r;
    opt.col_clusters = c;
    opt.n_singular_vectors = config.n_singular_vectors;
    opt.seed = derive_seed(config.seed, "bicluster");
    try {
      const auto model = analysis::spectral_bicluster(matrix.values, opt);
      bic["row_clusters"] = r;
      bic["col_clusters"] = c;
      bic["shift"] = model.shift;
      ojson rows = ojson::array();
      for (std::size_t q = 0; q < q_count; ++q) rows.push_back({{"bin", q + 1}, {"cluster", model.row_labels[q]}});
      bic["row_labels"] = rows;
      ojson cols = ojson::object();
      for (std::size_t k = 0; k < k_count; ++k) cols[table.words[k]] = model.col_labels[k];
      bic["col_labels"] = cols;
      ojson means = ojson::array();
      for (int a = 0; a < r; ++a) {
        ojson row = ojson::array();
        for (int b = 0; b < c; ++b) {
          const double v = model.block_means(a, b);
          row.push_back(std::isfinite(v) ? ojson(v) : ojson(nullptr));
        }
        means.push_back(row);
      }
      bic["block_means"] = means;
      ojson top = ojson::array();
      for (const auto& blk : analysis::top_blocks(model, matrix.values, 10)) {
        std::vector<int> bins;
        for (int q : blk.rows) bins.push_back(q + 1);
        std::vector<std::string> words;
        for (int k : blk.cols) words.push_back(table.words[k]);
        top.push_back({{"row_cluster", blk.row_cluster},
                       {"col_cluster", blk.col_cluster},
                       {"mean", blk.mean},
                       {"bins", bins},
                       {"words", words}});
      }
      bic["top_blocks"] = top;
    } catch (const DataError& e) {
      bic = ojson{{"skipped", e.what()}};
      log(std::string("analyze: biclustering skipped: ") + e.what());
    }
  }
  write_json(layout.bicluster(), bic);

  std::vector<std::vector<double>> basis;
  for (std::size_t k = 0; k < k_count; ++k) {
    basis.push_back(config.similarity == analysis::SimilarityBasis::delta ? deltas[k].bins : imp_hists[k].bins);
  }
  const auto dist = analysis::distance_matrix(basis, config.similarity);
  std::ostringstream dcsv;
  dcsv << "word";
  for (const auto& w : table.words) dcsv << ',' << w;
  dcsv << '\n';
  for (std::size_t a = 0; a < k_count; ++a) {
    dcsv << table.words[a];
    for (std::size_t b = 0; b < k_count; ++b) dcsv << ',' << full(dist(a, b));
    dcsv << '\n';
  }
  write_text_file(layout.distances(), dcsv.str());
  ojson nn = ojson::object();
  for (std::size_t k = 0; k < k_count; ++k) {
    ojson list = ojson::array();
    for (const auto& n : analysis::nearest_impressions(k, config.neighbors, dist)) {
      list.push_back({{"word", table.words[n.impression]}, {"distance", n.distance}});
    }
    nn[table.words[k]] = list;
  }
  write_json(layout.neighbors(), nn);
  log("analyze: " + std::to_string(k_count) + " impressions, Q = " + std::to_string(q_count));
  return 0;
}

int cmd_eval(const PipelineConfig& config) {
  config.validate();
  Layout layout{config.work_dir};
  const auto table = read_dataset_table(layout);
  require_file(layout.checkpoint(), "train");
  const auto params = deepsets::load_checkpoint(layout.checkpoint());
  const std::size_t k_count = table.words.size();
  if (params.num_labels() != k_count) throw DataError("checkpoint K does not match the dataset; rerun `fontparts train`");
  std::vector<FontEntry> test;
  for (const auto& f : table.fonts) {
    if (f.split == dataset::Split::test) test.push_back(f);
  }
  if (test.empty()) throw DataError("empty test set");
  const auto sets = load_sets(layout, test);
  auto pc = config.predict;
  pc.seed = derive_seed(config.seed, "predict");
  std::vector<eval::FontPrediction> preds(test.size());
  parallel_for(test.size(), [&](std::size_t i) {
    preds[i] = {test[i].font_id, to_std(predict_font(deepsets::descriptor_matrix(sets[i]), params, pc))};
  });

  fs::create_directories(layout.eval_dir());
  std::ostringstream pcsv;
  pcsv << "font_id";
  for (const auto& w : table.words) pcsv << ',' << w;
  pcsv << '\n';
  for (const auto& p : preds) {
    pcsv << p.font_id;
    for (double v : p.likelihoods) pcsv << ',' << full(v);
    pcsv << '\n';
  }
  write_text_file(layout.predictions(), pcsv.str());

  std::vector<eval::ApResult> results;
  std::vector<std::string> excluded;
  for (std::size_t k = 0; k < k_count; ++k) {
    std::vector<std::string> relevant;
    for (const auto& f : test) {
      if (std::find(f.impressions.begin(), f.impressions.end(), k) != f.impressions.end()) {
        relevant.push_back(f.font_id);
      }
    }
    if (relevant.empty()) {
      log("eval: impression " + table.words[k] + " has no test-set fonts; excluded from mAP");
      excluded.push_back(table.words[k]);
      continue;
    }
    results.push_back(eval::average_precision(eval::rank_fonts(preds, k), relevant));
  }
  if (results.empty()) throw DataError("no impression has test-set fonts");
  const double map = eval::mean_ap(results);

  ojson j;
  j["mAP"] = map;
  j["n_test_fonts"] = test.size();
  j["impressions"] = ojson::object();
  for (const auto& r : results) j["impressions"][table.words[r.impression]] = {{"ap", r.ap}, {"n_relevant", r.n_relevant}};
  j["excluded"] = excluded;
  write_json(layout.ap_json(), j);
  const auto report = eval::stability_report(results, table.words, config.table_size);
  write_text_file(layout.top_table(), eval::format_stability_csv(report.top));
  write_text_file(layout.bottom_table(), eval::format_stability_csv(report.bottom));
  log("eval: mAP " + fmt("%.4f", map) + " over " + std::to_string(results.size()) + " impressions");
  return 0;
}

namespace {

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split_on(line, ','));
  }
  return rows;
}

void table_md(std::ostringstream& out, const std::vector<std::vector<std::string>>& rows) {
  out << "| rank | word | AP (%) | relevant |\n|---:|---|---:|---:|\n";
  for (const auto& r : rows) {
    if (r.size() != 4) throw DataError("malformed AP table row");
    out << "| " << r[0] << " | " << r[1] << " | " << r[2] << " | " << r[3] << " |\n";
  }
}

}  // namespace

int cmd_report(const PipelineConfig& config) {
  Layout layout{config.work_dir};
  const std::vector<std::pair<fs::path, std::string>> needed = {
      {layout.fonts_table(), "extract"},     {layout.vocabulary_table(), "extract"},
      {layout.train_log(), "train"},          {layout.checkpoint(), "train"},
      {layout.codebook(), "codebook"},        {layout.kmeans_log(), "codebook"},
      {layout.delta_histograms(), "analyze"}, {layout.peaks(), "analyze"},
      {layout.bicluster(), "analyze"},        {layout.neighbors(), "analyze"},
      {layout.distances(), "analyze"},        {layout.ap_json(), "eval"},
      {layout.top_table(), "eval"},           {layout.bottom_table(), "eval"}};
  for (const auto& [path, stage] : needed) require_file(path, stage);

  const auto table = read_dataset_table(layout);
  std::size_t n_split[4] = {0, 0, 0, 0};
  for (const auto& f : table.fonts) ++n_split[static_cast<int>(f.split)];

  std::ostringstream out;
  out << "# Font part analysis report\n\n";
  out << "## Dataset\n\n";
  out << "- fonts: " << table.fonts.size() << " (train " << n_split[1] << ", val " << n_split[2] << ", test "
      << n_split[3] << ")\n";
  out << "- impressions: " << table.words.size() << "\n- seed: " << config.seed << "\n\n";
  out << "| word | fonts |\n|---|---:|\n";
  for (std::size_t k = 0; k < table.words.size(); ++k) out << "| " << table.words[k] << " | " << table.frequencies[k] << " |\n";

  const auto train_rows = read_csv_rows(layout.train_log());
  out << "\n## Training\n\n";
  if (train_rows.empty()) {
    out << "No epochs were run.\n";
  } else {
    std::size_t best = 0;
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      if (std::stod(train_rows[i][2]) < std::stod(train_rows[best][2])) best = i;
    }
    out << "- epochs run: " << train_rows.size() << "\n- best epoch: " << train_rows[best][0]
        << "\n- best validation loss: " << fmt("%.6f", std::stod(train_rows[best][2]))
        << "\n- final training loss: " << fmt("%.6f", std::stod(train_rows.back()[1])) << "\n";
  }

  const auto km_rows = read_csv_rows(layout.kmeans_log());
  const auto cb = codebook::load_codebook(layout.codebook());
  out << "\n## Codebook\n\n- Q: " << cb.size() << "\n- objective evaluations: " << km_rows.size()
      << "\n- final objective: " << (km_rows.empty() ? std::string("n/a") : fmt("%.6g", std::stod(km_rows.back()[1])))
      << "\n- largest bin occupancy: " << cb.occupancy.front() << "\n";

  const auto ap = read_json(layout.ap_json());
  out << "\n## Evaluation\n\n- test fonts: " << ap["n_test_fonts"].get<std::size_t>()
      << "\n- mAP: " << fmt("%.2f", 100.0 * ap["mAP"].get<double>()) << "%\n";
  if (!ap["excluded"].empty()) {
    out << "- excluded (no test fonts):";
    for (const auto& w : ap["excluded"]) out << ' ' << w.get<std::string>();
    out << '\n';
  }
  out << "\n### Highest AP\n\n";
  table_md(out, read_csv_rows(layout.top_table()));
  out << "\n### Lowest AP\n\n";
  table_md(out, read_csv_rows(layout.bottom_table()));

  const auto peaks = read_json(layout.peaks());
  out << "\n## Delta-histogram peaks\n\n| word | peak bins (value) |\n|---|---|\n";
  for (const auto& [word, list] : peaks["impressions"].items()) {
    out << "| " << word << " |";
    if (list.empty()) out << " none";
    for (const auto& p : list) out << ' ' << p["bin"].get<int>() << " (" << fmt("%.4g", p["value"].get<double>()) << ")";
    out << " |\n";
  }

  const auto nn = read_json(layout.neighbors());
  out << "\n## Nearest impressions\n\n| word | neighbors (distance) |\n|---|---|\n";
  for (const auto& [word, list] : nn.items()) {
    out << "| " << word << " |";
    for (const auto& n : list) {
      out << ' ' << n["word"].get<std::string>() << " (" << fmt("%.4f", n["distance"].get<double>()) << ")";
    }
    out << " |\n";
  }

  const auto bic = read_json(layout.bicluster());
  out << "\n## Biclusters\n\n";
  if (bic.contains("skipped")) {
    out << "Skipped: " << bic["skipped"].get<std::string>() << "\n";
  } else {
    out << "| rows x cols | mean | bins | words |\n|---|---:|---|---|\n";
    for (const auto& blk : bic["top_blocks"]) {
      out << "| " << blk["row_cluster"].get<int>() << " x " << blk["col_cluster"].get<int>() << " | "
          << fmt("%.4g", blk["mean"].get<double>()) << " |";
      for (const auto& b : blk["bins"]) out << ' ' << b.get<int>();
      out << " |";
      for (const auto& w : blk["words"]) out << ' ' << w.get<std::string>();
      out << " |\n";
    }
  }
  write_text_file(layout.report(), out.str());
  log("report: wrote " + layout.report().string());
  return 0;
}

int run_all(const PipelineConfig& config) {
  int worst = 0;
  if (config.manifest.empty()) worst = std::max(worst, cmd_synth(config));
  worst = std::max(worst, cmd_extract(config));
  worst = std::max(worst, cmd_train(config));
  worst = std::max(worst, cmd_codebook(config));
  worst = std::max(worst, cmd_analyze(config));
  worst = std::max(worst, cmd_eval(config));
  worst = std::max(worst, cmd_report(config));
  return worst;
}

}  // namespace fontparts::pipeline
