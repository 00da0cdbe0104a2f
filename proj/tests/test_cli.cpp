#include "support.hpp"

#include <json.hpp>
#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "fontparts/binary_io.hpp"
#include "fontparts/codebook.hpp"
#include "fontparts/descriptor_io.hpp"

using namespace fontparts;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

Run run(const testing::TempDir& dir, const std::string& args) {
  const auto err_path = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + FONTPARTS_CLI + "\" " + args + " >/dev/null 2>\"" + err_path.string() + "\"";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = fs::exists(err_path) ? read_text_file(err_path) : "";
  return r;
}

std::string tiny(const fs::path& work) {
  return "--work-dir \"" + work.string() +
         "\" -q --seed 3 --set synth.n_fonts=30 --set synth.glyphs_per_font=3 --set synth.feature_probability=0.5"
         " --set dataset.min_fonts=1 --set train.epochs=3 --set codebook.q=8 --set codebook.sample_size=5000 ";
}

bool run_all(const testing::TempDir& dir, const fs::path& work, const std::string& extra = "") {
  for (const char* stage : {"synth", "extract", "train", "codebook", "analyze", "eval", "report"}) {
    const auto r = run(dir, tiny(work) + extra + stage);
    if (r.code != 0) {
      MESSAGE(stage, ": ", r.err);
      return false;
    }
  }
  return true;
}

json read_json(const fs::path& p) { return json::parse(read_text_file(p)); }

}  // namespace

TEST_CASE("usage errors") {
  testing::TempDir dir("cli_usage");
  CHECK(run(dir, "").code == 1);
  CHECK(run(dir, "--bogus synth").code == 1);
  CHECK(run(dir, "--help").code == 0);
  CHECK(run(dir, "synth extract").code == 1);
  const auto bad = run(dir, tiny(dir / "w") + "--set synth.image_size=16 synth");
  CHECK(bad.code == 1);
  CHECK(bad.err.find("synth.image_size") != std::string::npos);
  CHECK(run(dir, tiny(dir / "w") + "--set train.epoch=3 synth").code == 1);
  CHECK(run(dir, tiny(dir / "w") + "--set nonsense synth").code == 1);
  CHECK(run(dir, "--config \"" + (dir / "none.ini").string() + "\" synth").code == 1);
}

TEST_CASE("empty synthetic dataset") {
  testing::TempDir dir("cli_empty");
  const auto r = run(dir, tiny(dir / "w") + "--set synth.n_fonts=0 synth");
  CHECK(r.code == 0);
  CHECK(read_text_file(dir / "w/synth/manifest.tsv").empty());
}

TEST_CASE("missing stages name the command to run") {
  testing::TempDir dir("cli_missing");
  const auto rep = run(dir, tiny(dir / "w") + "report");
  CHECK(rep.code != 0);
  CHECK(rep.err.find("run `fontparts") != std::string::npos);
  const auto ev = run(dir, tiny(dir / "w") + "eval");
  CHECK(ev.code != 0);
  CHECK(ev.err.find("run `fontparts") != std::string::npos);
}

TEST_CASE("tiny pipeline end to end") {
  testing::TempDir dir("cli_pipe");
  const auto w = dir / "w";
  REQUIRE(run_all(dir, w));

  SUBCASE("warm cache is reused") {
    std::vector<fs::file_time_type> before;
    for (const auto& e : fs::directory_iterator(w / "cache")) before.push_back(fs::last_write_time(e.path()));
    CHECK(run(dir, tiny(w) + "extract").code == 0);
    std::vector<fs::file_time_type> after;
    for (const auto& e : fs::directory_iterator(w / "cache")) after.push_back(fs::last_write_time(e.path()));
    CHECK(before == after);
  }

  SUBCASE("cache reload is bit exact") {
    const auto set = sift::load_descriptor_set(w / "cache/f0003.gidx");
    CHECK(sift::encode_descriptor_set(set) == read_file_bytes(w / "cache/f0003.gidx"));
  }

  SUBCASE("stage files agree") {
    const auto ap = read_json(w / "eval/ap.json");
    double sum = 0;
    for (const auto& [word, r] : ap["impressions"].items()) sum += r["ap"].get<double>();
    CHECK(ap["mAP"].get<double>() == doctest::Approx(sum / static_cast<double>(ap["impressions"].size())).epsilon(1e-12));
    char buf[32];
    std::snprintf(buf, sizeof buf, "mAP: %.2f%%", 100 * ap["mAP"].get<double>());
    CHECK(read_text_file(w / "report.md").find(buf) != std::string::npos);

    const auto deltas = codebook::parse_histogram_csv(read_text_file(w / "analysis/delta_histograms.csv"));
    REQUIRE(!deltas.empty());
    for (std::size_t q = 0; q < deltas.front().bins.size(); ++q) {
      double s = 0;
      for (const auto& d : deltas) s += d.bins[q];
      CHECK(std::abs(s) <= 1e-9);
    }
    const auto peaks = read_json(w / "analysis/peaks.json");
    for (const auto& d : deltas) {
      const auto expect = codebook::find_peaks(d.bins, peaks["top_n"].get<std::size_t>(), peaks["min_value"].get<double>());
      const auto& got = peaks["impressions"][d.owner];
      REQUIRE(got.size() == expect.size());
      for (std::size_t i = 0; i < expect.size(); ++i) {
        CHECK(got[i]["bin"].get<int>() == expect[i].q);
        CHECK(got[i]["value"].get<double>() == expect[i].value);
      }
    }
    const auto log = read_text_file(w / "model/train_log.csv");
    CHECK(log.rfind("epoch,train_loss,val_loss,seconds\n", 0) == 0);
    const auto km = read_text_file(w / "codebook/kmeans_log.csv");
    std::istringstream in(km);
    std::string line;
    std::getline(in, line);
    double prev = std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
      const double v = std::stod(line.substr(line.find(',') + 1));
      CHECK(v <= prev);
      prev = v;
    }
  }

  SUBCASE("stage isolation and determinism") {
    const auto report = read_text_file(w / "report.md");
    fs::remove_all(w / "analysis");
    fs::remove_all(w / "eval");
    fs::remove(w / "report.md");
    for (const char* stage : {"analyze", "eval", "report"}) CHECK(run(dir, tiny(w) + stage).code == 0);
    CHECK(read_text_file(w / "report.md") == report);

    const auto w2 = dir / "w2";
    REQUIRE(run_all(dir, w2, "--threads 1 "));
    CHECK(read_text_file(w2 / "report.md") == report);
  }

  SUBCASE("resume continues training") {
    CHECK(run(dir, tiny(w) + "--set train.epochs=5 train --resume").code == 0);
    const auto log = read_text_file(w / "model/train_log.csv");
    CHECK(std::count(log.begin(), log.end(), '\n') == 6);
  }
}

TEST_CASE("corrupt image is a partial failure") {
  testing::TempDir dir("cli_corrupt");
  const auto w = dir / "w";
  const std::string args = tiny(w) + "--set synth.n_fonts=10 ";
  REQUIRE(run(dir, args + "synth").code == 0);
  std::vector<fs::path> glyphs;
  for (const auto& e : fs::directory_iterator(w / "synth/images/f0004")) glyphs.push_back(e.path());
  REQUIRE(!glyphs.empty());
  write_text_file(glyphs.front(), "not an image");
  const auto r = run(dir, args + "extract");
  CHECK(r.code == 2);
  CHECK(r.err.find("f0004") != std::string::npos);
  std::size_t caches = 0;
  for (const auto& e : fs::directory_iterator(w / "cache")) caches += e.path().extension() == ".gidx";
  CHECK(caches == 9);
  const auto failures = read_text_file(w / "dataset/extract_failures.tsv");
  CHECK(failures.find("f0004") != std::string::npos);
}
