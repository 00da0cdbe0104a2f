#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fontparts/common.hpp"
#include "fontparts/config.hpp"
#include "fontparts/pipeline.hpp"

using namespace fontparts;

int main(int argc, char** argv) {
  CLI::App app{"fontparts: local shape parts and font impressions"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string work_dir;
  std::vector<std::string> overrides;
  bool quiet = false;
  bool resume = false;
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "global seed");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  app.add_option("--work-dir", work_dir, "output directory");
  app.add_option("--set", overrides, "override a config key, e.g. --set train.epochs=20");
  app.add_flag("-q,--quiet", quiet, "suppress progress messages");

  std::map<std::string, CLI::App*> commands;
  commands["synth"] = app.add_subcommand("synth", "generate the synthetic glyph dataset");
  commands["extract"] = app.add_subcommand("extract", "extract SIFT descriptors into the cache");
  commands["train"] = app.add_subcommand("train", "train the impression regressor");
  commands["train"]->add_flag("--resume", resume, "continue from the saved optimizer state");
  commands["codebook"] = app.add_subcommand("codebook", "fit the visual-word codebook");
  commands["analyze"] = app.add_subcommand("analyze", "histograms, peaks, biclusters and similarity");
  commands["eval"] = app.add_subcommand("eval", "AP per impression on the test split");
  commands["report"] = app.add_subcommand("report", "merge stage outputs into report.md");
  for (auto& [name, cmd] : commands) cmd->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    auto config = load_config(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got " + kv);
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) config.seed = *seed;
    if (threads) config.threads = *threads;
    if (!work_dir.empty()) config.work_dir = work_dir;
    config.validate();
    set_thread_count(config.threads);
    if (quiet) pipeline::set_log_stream(nullptr);

    if (commands["synth"]->parsed()) return pipeline::cmd_synth(config);
    if (commands["extract"]->parsed()) return pipeline::cmd_extract(config);
    if (commands["train"]->parsed()) return pipeline::cmd_train(config, resume);
    if (commands["codebook"]->parsed()) return pipeline::cmd_codebook(config);
    if (commands["analyze"]->parsed()) return pipeline::cmd_analyze(config);
    if (commands["eval"]->parsed()) return pipeline::cmd_eval(config);
    return pipeline::cmd_report(config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
