#include "dgre/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dgre/heads.hpp"

namespace dgre {
namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string strip_comment(const std::string& line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_quote = !in_quote;
    if (line[i] == '#' && !in_quote) return line.substr(0, i);
  }
  return line;
}

long long parse_int(const std::string& key, const std::string& raw) {
  long long v = 0;
  const char* begin = raw.data();
  const char* end = raw.data() + raw.size();
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end)
    throw ConfigError(key + " expects an integer, got '" + raw + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& raw) {
  std::uint64_t v = 0;
  const char* begin = raw.data();
  const char* end = raw.data() + raw.size();
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end)
    throw ConfigError(key + " expects a non-negative integer, got '" + raw + "'");
  return v;
}

double parse_double(const std::string& key, const std::string& raw) {
  double v = 0.0;
  const char* begin = raw.data();
  const char* end = raw.data() + raw.size();
  auto [p, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || p != end)
    throw ConfigError(key + " expects a number, got '" + raw + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  if (raw == "true") return true;
  if (raw == "false") return false;
  throw ConfigError(key + " expects true or false, got '" + raw + "'");
}

std::string parse_string(const std::string& key, const std::string& raw) {
  if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') {
    const std::string inner = raw.substr(1, raw.size() - 2);
    if (inner.find('"') != std::string::npos)
      throw ConfigError(key + ": embedded quotes are not supported");
    return inner;
  }
  if (raw.find('"') != std::string::npos)
    throw ConfigError(key + ": unbalanced quotes in '" + raw + "'");
  return raw;
}

std::vector<int> parse_int_array(const std::string& key, const std::string& raw) {
  if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
    throw ConfigError(key + " expects an array like [32, 16, 8], got '" + raw + "'");
  std::vector<int> out;
  std::string inner = raw.substr(1, raw.size() - 2);
  std::stringstream ss(inner);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) throw ConfigError(key + ": empty array element");
    out.push_back(static_cast<int>(parse_int(key, part)));
  }
  return out;
}

void set_key(RunConfig& cfg, const std::string& section, const std::string& key,
             const std::string& raw) {
  const std::string full = section.empty() ? key : section + "." + key;
  auto as_int = [&] { return static_cast<int>(parse_int(full, raw)); };
  auto as_dbl = [&] { return parse_double(full, raw); };
  auto as_str = [&] { return parse_string(full, raw); };

  if (section.empty()) {
    if (key == "seed") { cfg.seed = parse_u64(full, raw); return; }
    if (key == "threads") { cfg.threads = as_int(); return; }
  } else if (section == "data") {
    auto& d = cfg.data;
    if (key == "source") { d.source = as_str(); return; }
    if (key == "format") { d.format = as_str(); return; }
    if (key == "min_interactions") { d.min_interactions = as_int(); return; }
    if (key == "synth_markets") { d.synth_markets = as_int(); return; }
    if (key == "synth_users_per_market") { d.synth_users_per_market = as_int(); return; }
    if (key == "synth_items") { d.synth_items = as_int(); return; }
    if (key == "synth_groups") { d.synth_groups = as_int(); return; }
    if (key == "synth_items_per_group") { d.synth_items_per_group = as_int(); return; }
    if (key == "synth_p_in") { d.synth_p_in = as_dbl(); return; }
    if (key == "synth_p_out") { d.synth_p_out = as_dbl(); return; }
  } else if (section == "graph") {
    auto& g = cfg.graph;
    if (key == "min_common_items") { g.min_common_items = as_int(); return; }
    if (key == "min_common_users") { g.min_common_users = as_int(); return; }
  } else if (section == "embed") {
    auto& e = cfg.embed;
    if (key == "dim") { e.dim = as_int(); return; }
    if (key == "n_layers") { e.n_layers = as_int(); return; }
    if (key == "sample_size") { e.sample_size = as_int(); return; }
    if (key == "epochs") { e.epochs = as_int(); return; }
    if (key == "lr") { e.lr = as_dbl(); return; }
    if (key == "neg_per_pos") { e.neg_per_pos = as_int(); return; }
    if (key == "batch_edges") { e.batch_edges = as_int(); return; }
    if (key == "optimizer") { e.optimizer = as_str(); return; }
  } else if (section == "proto") {
    auto& p = cfg.proto;
    if (key == "k_proto") { p.k_proto = as_int(); return; }
    if (key == "k_s") { p.k_s = as_int(); return; }
    if (key == "alpha") { p.alpha = as_dbl(); return; }
    if (key == "refine_steps") { p.refine_steps = as_int(); return; }
    if (key == "refine_lr") { p.refine_lr = as_dbl(); return; }
    if (key == "refresh_interval") { p.refresh_interval = as_int(); return; }
    if (key == "disc_epochs") { p.disc_epochs = as_int(); return; }
    if (key == "disc_lr") { p.disc_lr = as_dbl(); return; }
    if (key == "disc_neg_per_pos") { p.disc_neg_per_pos = as_int(); return; }
  } else if (section == "head") {
    auto& h = cfg.head;
    if (key == "backbone") { h.backbone = as_str(); return; }
    if (key == "variant") { h.variant = as_str(); return; }
    if (key == "dim") { h.dim = as_int(); return; }
    if (key == "mlp_widths") { h.mlp_widths = parse_int_array(full, raw); return; }
    if (key == "epochs") { h.epochs = as_int(); return; }
    if (key == "lr") { h.lr = as_dbl(); return; }
    if (key == "neg_per_pos") { h.neg_per_pos = as_int(); return; }
    if (key == "batch_size") { h.batch_size = as_int(); return; }
    if (key == "soft_mixture") { h.soft_mixture = parse_bool(full, raw); return; }
  } else if (section == "eval") {
    auto& e = cfg.eval;
    if (key == "k_cutoff") { e.k_cutoff = as_int(); return; }
    if (key == "n_negatives") { e.n_negatives = as_int(); return; }
  } else {
    throw ConfigError("unknown config section [" + section + "]");
  }
  throw ConfigError("unknown config key " + full);
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, p);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string format_int_array(const std::vector<int>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(v[i]);
  }
  return s + "]";
}

}  // namespace

RunConfig parse_config_string(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header '" +
                          line + "'");
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"data", "graph", "embed", "proto", "head", "eval"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known))
        throw ConfigError("unknown config section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value, got '" +
                        line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    set_key(cfg, section, key, raw);
  }
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_string(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "seed = " << cfg.seed << "\n";
  out << "threads = " << cfg.threads << "\n";
  out << "\n[data]\n";
  out << "source = \"" << cfg.data.source << "\"\n";
  out << "format = \"" << cfg.data.format << "\"\n";
  out << "min_interactions = " << cfg.data.min_interactions << "\n";
  out << "synth_markets = " << cfg.data.synth_markets << "\n";
  out << "synth_users_per_market = " << cfg.data.synth_users_per_market << "\n";
  out << "synth_items = " << cfg.data.synth_items << "\n";
  out << "synth_groups = " << cfg.data.synth_groups << "\n";
  out << "synth_items_per_group = " << cfg.data.synth_items_per_group << "\n";
  out << "synth_p_in = " << format_double(cfg.data.synth_p_in) << "\n";
  out << "synth_p_out = " << format_double(cfg.data.synth_p_out) << "\n";
  out << "\n[graph]\n";
  out << "min_common_items = " << cfg.graph.min_common_items << "\n";
  out << "min_common_users = " << cfg.graph.min_common_users << "\n";
  out << "\n[embed]\n";
  out << "dim = " << cfg.embed.dim << "\n";
  out << "n_layers = " << cfg.embed.n_layers << "\n";
  out << "sample_size = " << cfg.embed.sample_size << "\n";
  out << "epochs = " << cfg.embed.epochs << "\n";
  out << "lr = " << format_double(cfg.embed.lr) << "\n";
  out << "neg_per_pos = " << cfg.embed.neg_per_pos << "\n";
  out << "batch_edges = " << cfg.embed.batch_edges << "\n";
  out << "optimizer = \"" << cfg.embed.optimizer << "\"\n";
  out << "\n[proto]\n";
  out << "k_proto = " << cfg.proto.k_proto << "\n";
  out << "k_s = " << cfg.proto.k_s << "\n";
  out << "alpha = " << format_double(cfg.proto.alpha) << "\n";
  out << "refine_steps = " << cfg.proto.refine_steps << "\n";
  out << "refine_lr = " << format_double(cfg.proto.refine_lr) << "\n";
  out << "refresh_interval = " << cfg.proto.refresh_interval << "\n";
  out << "disc_epochs = " << cfg.proto.disc_epochs << "\n";
  out << "disc_lr = " << format_double(cfg.proto.disc_lr) << "\n";
  out << "disc_neg_per_pos = " << cfg.proto.disc_neg_per_pos << "\n";
  out << "\n[head]\n";
  out << "backbone = \"" << cfg.head.backbone << "\"\n";
  out << "variant = \"" << cfg.head.variant << "\"\n";
  out << "dim = " << cfg.head.dim << "\n";
  out << "mlp_widths = " << format_int_array(cfg.head.mlp_widths) << "\n";
  out << "epochs = " << cfg.head.epochs << "\n";
  out << "lr = " << format_double(cfg.head.lr) << "\n";
  out << "neg_per_pos = " << cfg.head.neg_per_pos << "\n";
  out << "batch_size = " << cfg.head.batch_size << "\n";
  out << "soft_mixture = " << (cfg.head.soft_mixture ? "true" : "false") << "\n";
  out << "\n[eval]\n";
  out << "k_cutoff = " << cfg.eval.k_cutoff << "\n";
  out << "n_negatives = " << cfg.eval.n_negatives << "\n";
  return out.str();
}

void save_config(const RunConfig& cfg, const std::filesystem::path& path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config to " + path.string());
  out << serialize_config(cfg);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override '" + assignment + "' must look like section.key=value");
  std::string key = trim(assignment.substr(0, eq));
  const std::string raw = trim(assignment.substr(eq + 1));
  std::string section;
  const auto dotpos = key.find('.');
  if (dotpos != std::string::npos) {
    section = key.substr(0, dotpos);
    key = key.substr(dotpos + 1);
  }
  set_key(cfg, section, key, raw);
}

void validate_config(const RunConfig& cfg) {
  auto positive = [](const std::string& key, auto v) {
    if (v <= 0) throw ConfigError(key + " must be positive");
  };
  auto non_negative = [](const std::string& key, auto v) {
    if (v < 0) throw ConfigError(key + " must be non-negative");
  };
  positive("threads", cfg.threads);
  if (cfg.data.source.empty()) throw ConfigError("data.source must not be empty");
  if (cfg.data.format != "canonical_tsv" && cfg.data.format != "per_market_dir")
    throw ConfigError("data.format must be canonical_tsv or per_market_dir, got '" +
                      cfg.data.format + "'");
  positive("data.min_interactions", cfg.data.min_interactions);
  positive("data.synth_markets", cfg.data.synth_markets);
  positive("data.synth_users_per_market", cfg.data.synth_users_per_market);
  positive("data.synth_items", cfg.data.synth_items);
  positive("data.synth_groups", cfg.data.synth_groups);
  positive("data.synth_items_per_group", cfg.data.synth_items_per_group);
  if (cfg.data.synth_p_in <= 0.0 || cfg.data.synth_p_in > 1.0)
    throw ConfigError("data.synth_p_in must lie in (0, 1]");
  if (cfg.data.synth_p_out < 0.0 || cfg.data.synth_p_out > 1.0)
    throw ConfigError("data.synth_p_out must lie in [0, 1]");
  if (cfg.data.synth_p_in <= cfg.data.synth_p_out)
    throw ConfigError("data.synth_p_in must exceed data.synth_p_out");
  if (cfg.data.synth_groups * cfg.data.synth_items_per_group > cfg.data.synth_items)
    throw ConfigError("data.synth_groups * data.synth_items_per_group exceeds data.synth_items");
  positive("graph.min_common_items", cfg.graph.min_common_items);
  positive("graph.min_common_users", cfg.graph.min_common_users);
  positive("embed.dim", cfg.embed.dim);
  non_negative("embed.n_layers", cfg.embed.n_layers);
  positive("embed.sample_size", cfg.embed.sample_size);
  non_negative("embed.epochs", cfg.embed.epochs);
  positive("embed.lr", cfg.embed.lr);
  non_negative("embed.neg_per_pos", cfg.embed.neg_per_pos);
  positive("embed.batch_edges", cfg.embed.batch_edges);
  if (cfg.embed.optimizer != "adam" && cfg.embed.optimizer != "sgd")
    throw ConfigError("embed.optimizer must be adam or sgd, got '" + cfg.embed.optimizer + "'");
  positive("proto.k_proto", cfg.proto.k_proto);
  positive("proto.k_s", cfg.proto.k_s);
  positive("proto.alpha", cfg.proto.alpha);
  non_negative("proto.refine_steps", cfg.proto.refine_steps);
  positive("proto.refine_lr", cfg.proto.refine_lr);
  positive("proto.refresh_interval", cfg.proto.refresh_interval);
  non_negative("proto.disc_epochs", cfg.proto.disc_epochs);
  positive("proto.disc_lr", cfg.proto.disc_lr);
  positive("proto.disc_neg_per_pos", cfg.proto.disc_neg_per_pos);
  try {
    backbone_from_string(cfg.head.backbone);
  } catch (const std::invalid_argument&) {
    throw ConfigError("head.backbone must be gmf, mlp or nmf, got '" + cfg.head.backbone + "'");
  }
  try {
    variant_from_string(cfg.head.variant);
  } catch (const std::invalid_argument&) {
    throw ConfigError("head.variant must be base, dgre or market_aware, got '" +
                      cfg.head.variant + "'");
  }
  positive("head.dim", cfg.head.dim);
  if (cfg.head.backbone != "gmf") {
    if (cfg.head.mlp_widths.empty()) throw ConfigError("head.mlp_widths must not be empty");
    for (int w : cfg.head.mlp_widths)
      if (w <= 0) throw ConfigError("head.mlp_widths entries must be positive");
  }
  non_negative("head.epochs", cfg.head.epochs);
  positive("head.lr", cfg.head.lr);
  non_negative("head.neg_per_pos", cfg.head.neg_per_pos);
  positive("head.batch_size", cfg.head.batch_size);
  positive("eval.k_cutoff", cfg.eval.k_cutoff);
  positive("eval.n_negatives", cfg.eval.n_negatives);
}

FileFormat file_format_from_string(const std::string& s) {
  if (s == "canonical_tsv") return FileFormat::canonical_tsv;
  if (s == "per_market_dir") return FileFormat::per_market_dir;
  throw ConfigError("data.format must be canonical_tsv or per_market_dir, got '" + s + "'");
}

}  // namespace dgre
