#include "dgre/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dgre {
namespace {

void open_for_write(std::ofstream& out, const std::filesystem::path& path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  out.open(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
}

std::ifstream open_artifact(const std::filesystem::path& path) {
  require_artifact(path);
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

double parse_double_field(const std::filesystem::path& path, int line_no, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                             ": expected a number, got '" + s + "'");
  }
}

std::int64_t parse_id_field(const std::filesystem::path& path, int line_no,
                            const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                             ": expected an integer id, got '" + s + "'");
  }
}

}  // namespace

void require_artifact(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw MissingArtifact(p);
}

std::uint64_t fnv1a_hash(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t hash_file(const std::filesystem::path& p) {
  require_artifact(p);
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return fnv1a_hash(buf.view());
}

void write_manifest(const std::filesystem::path& path, const std::string& stage,
                    std::uint64_t seed, const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs) {
  nlohmann::json m;
  m["stage"] = stage;
  m["version"] = 1;
  m["seed"] = seed;
  nlohmann::json in_obj = nlohmann::json::object();
  for (const auto& p : inputs) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(hash_file(p)));
    in_obj[p.generic_string()] = buf;
  }
  m["inputs"] = in_obj;
  nlohmann::json out_arr = nlohmann::json::array();
  for (const auto& p : outputs) out_arr.push_back(p.generic_string());
  m["outputs"] = out_arr;
  std::ofstream out;
  open_for_write(out, path);
  out << m.dump(2) << "\n";
}

void write_embeddings_tsv(const EmbeddingTable& e, const std::filesystem::path& path) {
  std::ofstream out;
  open_for_write(out, path);
  for (int r = 0; r < e.n_rows(); ++r) {
    out << e.ids[static_cast<std::size_t>(r)];
    for (double v : e.row(r)) out << '\t' << fmt9(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

EmbeddingTable load_embeddings_tsv(const std::filesystem::path& path) {
  auto in = open_artifact(path);
  EmbeddingTable e;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2)
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": expected id and vector");
    const std::int64_t id = parse_id_field(path, line_no, fields[0]);
    const int dim = static_cast<int>(fields.size()) - 1;
    if (e.dim == 0) e.dim = dim;
    if (dim != e.dim)
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": vector length " + std::to_string(dim) + " differs from " +
                               std::to_string(e.dim));
    if (!e.index.emplace(id, e.n_rows()).second)
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": duplicate node id " + std::to_string(id));
    e.ids.push_back(id);
    for (int k = 0; k < dim; ++k)
      e.data.push_back(parse_double_field(path, line_no, fields[static_cast<std::size_t>(k) + 1]));
  }
  return e;
}

void write_graph_dump(const InteractionGraph& g, const std::filesystem::path& edges_path,
                      const std::filesystem::path& node_index_path) {
  std::ofstream nodes;
  open_for_write(nodes, node_index_path);
  for (int i = 0; i < g.n_nodes(); ++i)
    nodes << i << '\t' << g.node_ids[static_cast<std::size_t>(i)] << '\n';
  std::ofstream edges;
  open_for_write(edges, edges_path);
  for (int i = 0; i < g.n_nodes(); ++i)
    for (int j : g.adj[static_cast<std::size_t>(i)])
      if (i < j) edges << i << '\t' << j << '\n';
  if (!nodes || !edges)
    throw std::runtime_error("failed writing graph dump to " + edges_path.string());
}

InteractionGraph load_graph_dump(const std::filesystem::path& edges_path,
                                 const std::filesystem::path& node_index_path) {
  auto nodes_in = open_artifact(node_index_path);
  std::vector<std::int64_t> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(nodes_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2)
      throw std::runtime_error(node_index_path.string() + " line " + std::to_string(line_no) +
                               ": expected index and id");
    const auto idx = parse_id_field(node_index_path, line_no, fields[0]);
    if (idx != static_cast<std::int64_t>(ids.size()))
      throw std::runtime_error(node_index_path.string() + " line " + std::to_string(line_no) +
                               ": indices must be dense and ascending");
    ids.push_back(parse_id_field(node_index_path, line_no, fields[1]));
  }
  auto edges_in = open_artifact(edges_path);
  std::vector<std::pair<int, int>> edges;
  line_no = 0;
  while (std::getline(edges_in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2)
      throw std::runtime_error(edges_path.string() + " line " + std::to_string(line_no) +
                               ": expected two node indices");
    edges.emplace_back(static_cast<int>(parse_id_field(edges_path, line_no, fields[0])),
                       static_cast<int>(parse_id_field(edges_path, line_no, fields[1])));
  }
  return graph_from_edges(std::move(ids), edges);
}

void write_test_instances_tsv(const std::vector<TestInstance>& test,
                              const std::filesystem::path& path) {
  std::ofstream out;
  open_for_write(out, path);
  for (const auto& t : test) out << t.market.code << '\t' << t.user << '\t' << t.item << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<TestInstance> load_test_instances_tsv(const std::filesystem::path& path) {
  auto in = open_artifact(path);
  std::vector<TestInstance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3)
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": expected market, user, item");
    TestInstance t;
    t.market = MarketId{fields[0]};
    t.user = parse_id_field(path, line_no, fields[1]);
    t.item = parse_id_field(path, line_no, fields[2]);
    out.push_back(std::move(t));
  }
  return out;
}

void write_user_prototypes_tsv(const UserPrototypeSet& protos, const std::filesystem::path& path) {
  std::ofstream out;
  open_for_write(out, path);
  for (std::size_t k = 0; k < protos.prototypes.size(); ++k) {
    out << k << '\t' << protos.source_nodes[k];
    for (double v : protos.prototypes[k]) out << '\t' << fmt9(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

UserPrototypeSet load_user_prototypes_tsv(const std::filesystem::path& path, double alpha) {
  auto in = open_artifact(path);
  UserPrototypeSet protos;
  protos.alpha = alpha;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 3)
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": expected index, source node and vector");
    if (parse_id_field(path, line_no, fields[0]) !=
        static_cast<std::int64_t>(protos.prototypes.size()))
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": prototype indices must be dense and ascending");
    protos.source_nodes.push_back(parse_id_field(path, line_no, fields[1]));
    std::vector<double> vec;
    for (std::size_t f = 2; f < fields.size(); ++f)
      vec.push_back(parse_double_field(path, line_no, fields[f]));
    protos.prototypes.push_back(std::move(vec));
  }
  return protos;
}

void write_assignments_tsv(const SoftAssignment& a, const std::filesystem::path& path) {
  std::ofstream out;
  open_for_write(out, path);
  for (int r = 0; r < a.w.rows; ++r) {
    out << a.row_ids[static_cast<std::size_t>(r)] << '\t' << assign_prototype(a.w, r);
    for (double v : a.w.row(r)) out << '\t' << fmt9(v);
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

SoftAssignment load_assignments_tsv(const std::filesystem::path& path) {
  auto in = open_artifact(path);
  std::vector<std::int64_t> ids;
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 3)
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": expected user, assigned index and row");
    ids.push_back(parse_id_field(path, line_no, fields[0]));
    std::vector<double> row;
    for (std::size_t f = 2; f < fields.size(); ++f)
      row.push_back(parse_double_field(path, line_no, fields[f]));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error(path.string() + " line " + std::to_string(line_no) +
                               ": ragged assignment rows");
    rows.push_back(std::move(row));
  }
  SoftAssignment a;
  a.row_ids = std::move(ids);
  const int k = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  a.w = Tensor2(static_cast<int>(rows.size()), k);
  for (std::size_t r = 0; r < rows.size(); ++r)
    std::copy(rows[r].begin(), rows[r].end(), a.w.row(static_cast<int>(r)).begin());
  a.w_sharp = sharpen(a.w);
  return a;
}

void write_market_prototypes(const MarketPrototypes& protos,
                             const std::filesystem::path& proto_path,
                             const std::filesystem::path& items_path) {
  std::ofstream out;
  open_for_write(out, proto_path);
  for (const auto& [mk, proto] : protos.by_market) {
    out << mk.code;
    for (double v : proto.vec) out << '\t' << fmt9(v);
    out << '\n';
  }
  std::ofstream items;
  open_for_write(items, items_path);
  for (const auto& [mk, proto] : protos.by_market)
    for (const auto& s : proto.selected)
      items << mk.code << '\t' << s.item << '\t' << fmt9(s.mi) << '\n';
  if (!out || !items)
    throw std::runtime_error("failed writing market prototypes to " + proto_path.string());
}

MarketPrototypes load_market_prototypes(const std::filesystem::path& proto_path,
                                        const std::filesystem::path& items_path) {
  MarketPrototypes protos;
  auto in = open_artifact(proto_path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2)
      throw std::runtime_error(proto_path.string() + " line " + std::to_string(line_no) +
                               ": expected market and vector");
    MarketPrototype p;
    p.market = MarketId{fields[0]};
    for (std::size_t f = 1; f < fields.size(); ++f)
      p.vec.push_back(parse_double_field(proto_path, line_no, fields[f]));
    protos.by_market.emplace(p.market, std::move(p));
  }
  auto items = open_artifact(items_path);
  line_no = 0;
  while (std::getline(items, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3)
      throw std::runtime_error(items_path.string() + " line " + std::to_string(line_no) +
                               ": expected market, item, score");
    const MarketId mk{fields[0]};
    auto it = protos.by_market.find(mk);
    if (it == protos.by_market.end())
      throw std::runtime_error(items_path.string() + " line " + std::to_string(line_no) +
                               ": market '" + mk.code + "' has no prototype row");
    ItemScore s;
    s.item = parse_id_field(items_path, line_no, fields[1]);
    s.mi = parse_double_field(items_path, line_no, fields[2]);
    it->second.selected.push_back(s);
  }
  return protos;
}

void write_results_tsv(const RankingMetrics& metrics, int k_cutoff,
                       const std::filesystem::path& path) {
  std::ofstream out;
  open_for_write(out, path);
  out << "market\tmetric\tk_cutoff\tvalue\tn_users\n";
  auto emit = [&](const std::string& market, const MarketMetrics& mm) {
    out << market << "\thr\t" << k_cutoff << '\t' << fmt9(mm.hr) << '\t' << mm.n_users << '\n';
    out << market << "\tndcg\t" << k_cutoff << '\t' << fmt9(mm.ndcg) << '\t' << mm.n_users
        << '\n';
  };
  for (const auto& [mk, mm] : metrics.per_market) emit(mk.code, mm);
  emit("overall", metrics.overall);
  for (const auto& note : metrics.notes) out << "# " << note << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_loss_trace_tsv(const std::vector<double>& loss, const std::filesystem::path& path) {
  std::ofstream out;
  open_for_write(out, path);
  for (std::size_t i = 0; i < loss.size(); ++i) out << i << '\t' << fmt9(loss[i]) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace dgre
