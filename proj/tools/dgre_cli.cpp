#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dgre/config.hpp"
#include "dgre/io.hpp"
#include "dgre/parallel.hpp"
#include "dgre/pipeline.hpp"

namespace {

std::uint64_t parse_seed_text(const std::string& text, const std::string& origin) {
  std::uint64_t value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end)
    throw dgre::ConfigError(origin + " must be an unsigned integer, got '" + text + "'");
  return value;
}

std::vector<int> parse_values_csv(const std::string& csv) {
  std::vector<int> out;
  std::stringstream in(csv);
  std::string field;
  while (std::getline(in, field, ',')) {
    int v = 0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end)
      throw dgre::ConfigError("--values must be a comma-separated list of integers, got '" +
                              csv + "'");
    out.push_back(v);
  }
  if (out.empty()) throw dgre::ConfigError("--values must name at least one integer");
  return out;
}

bool override_touches_seed(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) return false;
  auto key = assignment.substr(0, eq);
  key.erase(0, key.find_first_not_of(" \t"));
  const auto last = key.find_last_not_of(" \t");
  key.erase(last == std::string::npos ? 0 : last + 1);
  return key == "seed";
}

std::string slurp(const std::filesystem::path& path) {
  dgre::require_artifact(path);
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-prototype cross-market recommender pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::string seed_text;
  int threads_flag = 0;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "config file (flat TOML subset)");
  app.add_option("--out", out_dir, "run directory for artifacts")->required();
  auto* seed_opt = app.add_option("--seed", seed_text, "seed override (wins over config file)");
  auto* threads_opt =
      app.add_option("--threads", threads_flag, "worker threads (1 = fully deterministic)");
  app.add_option("--set", overrides, "config override, section.key=value (repeatable)");

  app.add_subcommand("synth", "generate a synthetic multi-market interaction log");
  auto* ingest = app.add_subcommand("ingest", "normalize an interaction log into the run dir");
  std::string input_path;
  ingest->add_option("--input", input_path, "interaction file or per-market directory");
  app.add_subcommand("graphs", "split the log and build co-interaction graphs");
  app.add_subcommand("embed", "train graph embeddings for users and per-market items");
  app.add_subcommand("prototypes", "extract user and market prototypes");
  app.add_subcommand("train", "train the configured recommendation head");
  app.add_subcommand("eval", "rank held-out items and report hr/ndcg");
  auto* ablate = app.add_subcommand("ablate", "sweep a prototype knob or ablate embeddings");
  std::string knob = "k_proto";
  std::string values_csv;
  ablate->add_option("--knob", knob, "k_proto | k_s | embeddings");
  ablate->add_option("--values", values_csv, "comma-separated sweep values (k knobs)");
  app.add_subcommand("all", "run every stage in order");

  try {
    app.parse(argc, argv);

    dgre::RunConfig cfg;
    bool seed_explicit = false;
    if (!config_path.empty()) {
      const std::string text = slurp(config_path);
      cfg = dgre::parse_config_string(text);
      const auto probe = dgre::parse_config_string("seed = 18446744073709551613\n" + text);
      seed_explicit = probe.seed == cfg.seed;
    }
    for (const auto& assignment : overrides) {
      dgre::apply_override(cfg, assignment);
      if (override_touches_seed(assignment)) seed_explicit = true;
    }
    if (seed_opt->count() > 0) {
      cfg.seed = parse_seed_text(seed_text, "--seed");
      seed_explicit = true;
    }
    if (!seed_explicit) {
      if (const char* env = std::getenv("DGRE_SEED"))
        cfg.seed = parse_seed_text(env, "DGRE_SEED");
    }
    if (threads_opt->count() > 0) cfg.threads = threads_flag;
    dgre::validate_config(cfg);
    dgre::set_thread_count(cfg.threads);

    const dgre::RunPaths paths{out_dir};
    const std::string cmd = app.get_subcommands().front()->get_name();
    std::vector<std::string> warnings;
    if (cmd == "synth") {
      cfg.data.source = "synth";
      warnings = dgre::run_synth(cfg, paths);
    } else if (cmd == "ingest") {
      if (!input_path.empty()) cfg.data.source = input_path;
      warnings = dgre::run_ingest(cfg, paths);
    } else if (cmd == "graphs") {
      warnings = dgre::run_graphs(cfg, paths);
    } else if (cmd == "embed") {
      warnings = dgre::run_embed(cfg, paths);
    } else if (cmd == "prototypes") {
      warnings = dgre::run_prototypes(cfg, paths);
    } else if (cmd == "train") {
      warnings = dgre::run_train(cfg, paths);
    } else if (cmd == "eval") {
      warnings = dgre::run_eval(cfg, paths);
    } else if (cmd == "ablate") {
      std::vector<int> values;
      if (!values_csv.empty())
        values = parse_values_csv(values_csv);
      else if (knob != "embeddings")
        values = {2, 4, 8, 16};
      warnings = dgre::run_ablate_cmd(cfg, paths, knob, values);
    } else {
      warnings = dgre::run_all(cfg, paths);
    }
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const dgre::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const dgre::MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
