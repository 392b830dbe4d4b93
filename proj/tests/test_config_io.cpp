#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "dgre/config.hpp"
#include "dgre/graph.hpp"
#include "dgre/io.hpp"
#include "dgre/user_prototypes.hpp"
#include "doctest.h"
#include "temp_dir.hpp"

using namespace dgre;

namespace {

std::string config_error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_SUITE("configuration") {

TEST_CASE("empty input yields the default configuration") {
  CHECK(parse_config_string("") == RunConfig{});
  CHECK(parse_config_string("\n# only a comment\n") == RunConfig{});
}

TEST_CASE("serialization round trips every field") {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.threads = 4;
  cfg.data.source = "logs/interactions.tsv";
  cfg.data.format = "per_market_dir";
  cfg.data.min_interactions = 3;
  cfg.data.synth_p_in = 0.25;
  cfg.graph.min_common_items = 4;
  cfg.embed.optimizer = "sgd";
  cfg.embed.lr = 0.005;
  cfg.proto.k_proto = 6;
  cfg.proto.alpha = 2.5;
  cfg.head.backbone = "nmf";
  cfg.head.variant = "market_aware";
  cfg.head.mlp_widths = {12, 6};
  cfg.head.soft_mixture = true;
  cfg.eval.n_negatives = 50;
  CHECK(parse_config_string(serialize_config(cfg)) == cfg);

  TempDir tmp("cfg");
  save_config(cfg, tmp.path / "c.toml");
  CHECK(parse_config_file(tmp.path / "c.toml") == cfg);
}

TEST_CASE("quoted strings, comments and arrays parse") {
  auto cfg = parse_config_string(
      "seed = 9\n"
      "[data]\n"
      "source = \"synth\"  # planted generator\n"
      "[head]\n"
      "mlp_widths = [12, 6, 3]\n");
  CHECK(cfg.seed == 9);
  CHECK(cfg.data.source == "synth");
  CHECK(cfg.head.mlp_widths == std::vector<int>{12, 6, 3});
}

TEST_CASE("unknown keys and malformed lines name the offender") {
  CHECK(config_error_of([] { parse_config_string("[data]\nbogus_key = 1\n"); })
            .find("bogus_key") != std::string::npos);
  CHECK(config_error_of([] { parse_config_string("[nosuch]\n"); }).find("nosuch") !=
        std::string::npos);
  CHECK(config_error_of([] { parse_config_string("just some words\n"); }).find("line 1") !=
        std::string::npos);
  CHECK(config_error_of([] { parse_config_string("[data]\nmin_interactions = soon\n"); })
            .find("min_interactions") != std::string::npos);
}

TEST_CASE("command line overrides reuse the parser") {
  RunConfig cfg;
  apply_override(cfg, "head.dim=8");
  apply_override(cfg, "seed=17");
  apply_override(cfg, "data.source=\"a/b.tsv\"");
  CHECK(cfg.head.dim == 8);
  CHECK(cfg.seed == 17);
  CHECK(cfg.data.source == "a/b.tsv");
  CHECK_THROWS_AS(apply_override(cfg, "head.dim"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "nosuch.key=1"), ConfigError);
}

TEST_CASE("validation names the first broken field") {
  RunConfig cfg;
  cfg.embed.dim = -1;
  CHECK(config_error_of([&] { validate_config(cfg); }).find("embed.dim") != std::string::npos);

  cfg = RunConfig{};
  cfg.data.synth_p_in = 0.01;
  cfg.data.synth_p_out = 0.5;
  CHECK_FALSE(config_error_of([&] { validate_config(cfg); }).empty());

  cfg = RunConfig{};
  cfg.head.backbone = "tower";
  CHECK(config_error_of([&] { validate_config(cfg); }).find("head.backbone") !=
        std::string::npos);

  cfg = RunConfig{};
  cfg.embed.optimizer = "newton";
  CHECK(config_error_of([&] { validate_config(cfg); }).find("embed.optimizer") !=
        std::string::npos);

  CHECK(config_error_of([] { validate_config(RunConfig{}); }).empty());
}

}  // TEST_SUITE

TEST_SUITE("artifact io") {

TEST_CASE("missing upstream files raise a typed error naming the path") {
  TempDir tmp("io-miss");
  auto ghost = tmp.path / "nope.tsv";
  try {
    require_artifact(ghost);
    FAIL("expected a missing artifact error");
  } catch (const MissingArtifact& e) {
    CHECK(std::string(e.what()).find("nope.tsv") != std::string::npos);
    CHECK(e.path == ghost);
  }
  std::ofstream(ghost) << "x";
  CHECK_NOTHROW(require_artifact(ghost));
}

TEST_CASE("the content hash follows the reference test vectors") {
  CHECK(fnv1a_hash("") == 14695981039346656037ull);
  CHECK(fnv1a_hash("a") == 0xaf63dc4c8601ec8cull);

  TempDir tmp("io-hash");
  auto f = tmp.path / "x.bin";
  std::ofstream(f) << "a";
  CHECK(hash_file(f) == fnv1a_hash("a"));
}

TEST_CASE("stage manifests are reproducible json") {
  TempDir tmp("io-manifest");
  auto input = tmp.path / "in.tsv";
  std::ofstream(input) << "payload";
  auto m1 = tmp.path / "m1.json";
  auto m2 = tmp.path / "m2.json";
  write_manifest(m1, "graphs", 42, {input}, {tmp.path / "out.tsv"});
  write_manifest(m2, "graphs", 42, {input}, {tmp.path / "out.tsv"});
  auto text = slurp(m1);
  CHECK(text == slurp(m2));
  CHECK(text.find("\"stage\"") != std::string::npos);
  CHECK(text.find("graphs") != std::string::npos);
  CHECK(text.find("in.tsv") != std::string::npos);
  CHECK(text.find("timestamp") == std::string::npos);
}

TEST_CASE("embedding tables round trip through tsv") {
  Rng rng(3);
  auto e = EmbeddingTable::zeros({5, 9, 2}, 4);
  for (auto& v : e.data) v = rng.normal();
  TempDir tmp("io-emb");
  auto f = tmp.path / "e.tsv";
  write_embeddings_tsv(e, f);
  auto back = load_embeddings_tsv(f);
  CHECK(back.ids == e.ids);
  CHECK(back.dim == e.dim);
  REQUIRE(back.data.size() == e.data.size());
  for (std::size_t i = 0; i < e.data.size(); ++i)
    CHECK(std::fabs(back.data[i] - e.data[i]) < 1e-6);
}

TEST_CASE("graphs round trip through their edge and node dumps") {
  auto g = graph_from_edges({30, 10, 20, 40}, {{0, 1}, {1, 2}, {0, 2}, {2, 3}});
  TempDir tmp("io-graph");
  write_graph_dump(g, tmp.path / "g.edges.tsv", tmp.path / "g.nodes.tsv");
  auto back = load_graph_dump(tmp.path / "g.edges.tsv", tmp.path / "g.nodes.tsv");
  CHECK(back.node_ids == g.node_ids);
  CHECK(back.adj == g.adj);
  CHECK(back.degrees == g.degrees);
  CHECK(back.edge_count == g.edge_count);
}

TEST_CASE("held-out instances round trip") {
  std::vector<TestInstance> test{{1, 10, {"de"}}, {2, 11, {"us"}}, {3, 12, {"de"}}};
  TempDir tmp("io-test");
  write_test_instances_tsv(test, tmp.path / "t.tsv");
  CHECK(load_test_instances_tsv(tmp.path / "t.tsv") == test);
}

TEST_CASE("prototype artifacts round trip") {
  Rng rng(5);
  UserPrototypeSet protos;
  protos.alpha = 2.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> v(4);
    for (auto& x : v) x = rng.normal();
    protos.prototypes.push_back(v);
    protos.source_nodes.push_back(100 + c);
  }
  TempDir tmp("io-proto");
  write_user_prototypes_tsv(protos, tmp.path / "p.tsv");
  auto back = load_user_prototypes_tsv(tmp.path / "p.tsv", 2.0);
  CHECK(back.alpha == 2.0);
  CHECK(back.source_nodes == protos.source_nodes);
  REQUIRE(back.prototypes.size() == 3);
  for (int c = 0; c < 3; ++c)
    for (int t = 0; t < 4; ++t)
      CHECK(std::fabs(back.prototypes[c][t] - protos.prototypes[c][t]) < 1e-6);

  Tensor2 e(5, 4);
  for (auto& v : e.data) v = rng.normal();
  SoftAssignment a;
  a.row_ids = {7, 8, 9, 10, 11};
  a.w = soft_assign_rows(e, protos.prototypes, protos.alpha);
  a.w_sharp = sharpen(a.w);
  write_assignments_tsv(a, tmp.path / "a.tsv");
  auto back_a = load_assignments_tsv(tmp.path / "a.tsv");
  CHECK(back_a.row_ids == a.row_ids);
  REQUIRE(back_a.w.same_shape(a.w));
  for (std::size_t i = 0; i < a.w.data.size(); ++i)
    CHECK(std::fabs(back_a.w.data[i] - a.w.data[i]) < 1e-6);
  CHECK(back_a.w_sharp.data == sharpen(back_a.w).data);
}

TEST_CASE("market prototypes round trip with their selected items") {
  MarketPrototypes protos;
  MarketPrototype de;
  de.market = {"de"};
  de.vec = {0.5, -1.5, 2.0};
  de.selected = {{10, 0.8}, {11, 0.3}};
  MarketPrototype us;
  us.market = {"us"};
  us.vec = {1.0, 0.0, -0.25};
  us.selected = {{12, -0.1}};
  protos.by_market = {{de.market, de}, {us.market, us}};

  TempDir tmp("io-market");
  write_market_prototypes(protos, tmp.path / "m.tsv", tmp.path / "items.tsv");
  auto back = load_market_prototypes(tmp.path / "m.tsv", tmp.path / "items.tsv");
  REQUIRE(back.by_market.size() == 2);
  const auto& bde = back.by_market.at(MarketId{"de"});
  REQUIRE(bde.selected.size() == 2);
  CHECK(bde.selected[0].item == 10);
  CHECK(std::fabs(bde.selected[0].mi - 0.8) < 1e-6);
  for (int t = 0; t < 3; ++t) CHECK(std::fabs(bde.vec[t] - de.vec[t]) < 1e-6);
  CHECK(back.by_market.at(MarketId{"us"}).selected.size() == 1);
}

TEST_CASE("results land in a flat tsv with a pooled row and notes as comments") {
  RankingMetrics metrics;
  metrics.per_market[{"de"}] = {0.5, 0.4, 10};
  metrics.per_market[{"us"}] = {0.7, 0.6, 30};
  metrics.overall = {0.65, 0.55, 40};
  metrics.notes.push_back("market jp has no test users");
  TempDir tmp("io-results");
  write_results_tsv(metrics, 10, tmp.path / "r.tsv");
  auto text = slurp(tmp.path / "r.tsv");
  CHECK(text.find("market\tmetric\tk_cutoff\tvalue\tn_users") != std::string::npos);
  CHECK(text.find("de\thr\t10\t0.5\t10") != std::string::npos);
  CHECK(text.find("overall\tndcg\t10\t0.55\t40") != std::string::npos);
  CHECK(text.find("# market jp has no test users") != std::string::npos);
}

TEST_CASE("loss traces are indexed from zero") {
  TempDir tmp("io-loss");
  write_loss_trace_tsv({0.5, 0.25}, tmp.path / "l.tsv");
  auto text = slurp(tmp.path / "l.tsv");
  CHECK(text.find("0\t0.5") != std::string::npos);
  CHECK(text.find("1\t0.25") != std::string::npos);
}

}  // TEST_SUITE
