#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgre/data.hpp"

namespace dgre {

// Raised for malformed config text, unknown keys, and value-range violations.
// The message always names the offending key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::string source = "synth";  // "synth" or a path to an interaction file
  std::string format = "canonical_tsv";
  int min_interactions = 5;
  int synth_markets = 3;
  int synth_users_per_market = 200;
  int synth_items = 300;
  int synth_groups = 4;
  int synth_items_per_group = 75;
  double synth_p_in = 0.3;
  double synth_p_out = 0.02;

  bool operator==(const DataConfig&) const = default;
};

struct GraphConfig {
  int min_common_items = 2;
  int min_common_users = 2;

  bool operator==(const GraphConfig&) const = default;
};

struct EmbedConfig {
  int dim = 32;
  int n_layers = 2;
  int sample_size = 10;
  int epochs = 20;
  double lr = 0.01;
  int neg_per_pos = 5;
  int batch_edges = 8192;
  std::string optimizer = "adam";  // "adam" or "sgd"

  bool operator==(const EmbedConfig&) const = default;
};

struct ProtoConfig {
  int k_proto = 10;
  int k_s = 10;
  double alpha = 1.0;
  int refine_steps = 20;
  double refine_lr = 0.05;
  int refresh_interval = 10;
  int disc_epochs = 10;
  double disc_lr = 0.01;
  int disc_neg_per_pos = 5;

  bool operator==(const ProtoConfig&) const = default;
};

struct HeadConfig {
  std::string backbone = "gmf";  // gmf | mlp | nmf
  std::string variant = "dgre";  // base | dgre | market_aware
  int dim = 16;
  std::vector<int> mlp_widths{32, 16, 8};
  int epochs = 20;
  double lr = 1e-3;
  int neg_per_pos = 4;
  int batch_size = 256;
  bool soft_mixture = false;

  bool operator==(const HeadConfig&) const = default;
};

struct EvalConfig {
  int k_cutoff = 10;
  int n_negatives = 99;

  bool operator==(const EvalConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 42;
  int threads = 1;
  DataConfig data;
  GraphConfig graph;
  EmbedConfig embed;
  ProtoConfig proto;
  HeadConfig head;
  EvalConfig eval;

  bool operator==(const RunConfig&) const = default;
};

// Flat TOML subset: top-level `seed`/`threads`, then [data] [graph] [embed]
// [proto] [head] [eval] sections of scalar keys plus one integer array.
RunConfig parse_config_string(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::filesystem::path& path);

// "section.key=value" (or "seed=7" for top-level keys), as given to --set.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Throws ConfigError naming the first invalid field.
void validate_config(const RunConfig& cfg);

FileFormat file_format_from_string(const std::string& s);

}  // namespace dgre
