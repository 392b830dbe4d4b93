#include "dgre/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "dgre/io.hpp"
#include "dgre/rng.hpp"

namespace dgre {
namespace {

std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

SynthConfig synth_config_from(const DataConfig& d) {
  SynthConfig s;
  s.n_markets = d.synth_markets;
  s.users_per_market = d.synth_users_per_market;
  s.n_items = d.synth_items;
  s.n_groups = d.synth_groups;
  s.items_per_group = d.synth_items_per_group;
  s.p_in = d.synth_p_in;
  s.p_out = d.synth_p_out;
  return s;
}

SageTrainOptions sage_options_from(const EmbedConfig& e, std::uint64_t seed) {
  SageTrainOptions o;
  o.dim = e.dim;
  o.n_layers = e.n_layers;
  o.sample_size = e.sample_size;
  o.epochs = e.epochs;
  o.lr = e.lr;
  o.neg_per_pos = e.neg_per_pos;
  o.batch_edges = e.batch_edges;
  o.optimizer = e.optimizer == "sgd" ? SageOptimizer::sgd : SageOptimizer::adam;
  o.seed = seed;
  return o;
}

HeadTrainOptions head_options_from(const HeadConfig& h, std::uint64_t seed) {
  HeadTrainOptions o;
  o.dim = h.dim;
  o.mlp_widths = h.mlp_widths;
  o.epochs = h.epochs;
  o.lr = h.lr;
  o.neg_per_pos = h.neg_per_pos;
  o.batch_size = h.batch_size;
  o.seed = seed;
  return o;
}

RefineOptions refine_options_from(const ProtoConfig& p) {
  RefineOptions o;
  o.steps = p.refine_steps;
  o.lr = p.refine_lr;
  o.refresh_interval = p.refresh_interval;
  return o;
}

MarketProtoOptions market_options_from(const RunConfig& cfg) {
  MarketProtoOptions o;
  o.k_s = cfg.proto.k_s;
  o.min_common_users = cfg.graph.min_common_users;
  o.disc.epochs = cfg.proto.disc_epochs;
  o.disc.lr = cfg.proto.disc_lr;
  o.disc.neg_per_pos = cfg.proto.disc_neg_per_pos;
  o.disc.seed = mix_seed(cfg.seed, "disc");
  return o;
}

Dataset load_raw(const RunConfig& cfg) {
  if (cfg.data.source == "synth")
    return generate_synthetic(synth_config_from(cfg.data), cfg.seed);
  require_artifact(cfg.data.source);
  return load_interactions(cfg.data.source, file_format_from_string(cfg.data.format));
}

SplitDataset split_filtered(const RunConfig& cfg, const Dataset& raw) {
  const Dataset filtered = filter_min_interactions(raw, cfg.data.min_interactions);
  if (filtered.interactions.empty())
    throw ConfigError("data.min_interactions leaves no interactions to train on");
  return leave_one_out_split(filtered, cfg.seed);
}

std::vector<std::string> market_failure_warnings(const MarketPrototypes& mp) {
  std::vector<std::string> out;
  for (const auto& [mk, why] : mp.failures)
    out.push_back("market " + mk.code + " has no prototype: " + why);
  return out;
}

SplitDataset load_split(const RunPaths& paths) {
  SplitDataset split;
  split.train = load_interactions(paths.train_tsv(), FileFormat::canonical_tsv);
  split.test = load_test_instances_tsv(paths.test_tsv());
  return split;
}

std::map<MarketId, EmbeddingTable> load_item_embeddings(const RunPaths& paths,
                                                        const Dataset& train) {
  std::map<MarketId, EmbeddingTable> out;
  for (const auto& mk : train.markets)
    out.emplace(mk, load_embeddings_tsv(paths.item_embeddings(mk)));
  return out;
}

}  // namespace

HeadKind head_kind_from_config(const HeadConfig& head) {
  HeadKind kind;
  kind.backbone = backbone_from_string(head.backbone);
  kind.variant = variant_from_string(head.variant);
  return kind;
}

PipelineArtifacts build_pipeline(const RunConfig& cfg) {
  validate_config(cfg);
  PipelineArtifacts art;
  art.raw = load_raw(cfg);
  art.split = split_filtered(cfg, art.raw);

  art.user_graph = build_user_graph(art.split.train, cfg.graph.min_common_items);
  for (const auto& mk : art.split.train.markets)
    art.item_graphs.emplace(mk,
                            build_item_graph(art.split.train, mk, cfg.graph.min_common_users));

  auto user_sage =
      train_unsupervised(art.user_graph, sage_options_from(cfg.embed, mix_seed(cfg.seed, "embed-user")));
  art.user_embeddings_raw = std::move(user_sage.embeddings);
  art.user_graph_edgeless = user_sage.edgeless;
  for (const auto& [mk, g] : art.item_graphs) {
    auto res = train_unsupervised(
        g, sage_options_from(cfg.embed, mix_seed(cfg.seed, "embed-item-" + mk.code)));
    art.item_embeddings.emplace(mk, std::move(res.embeddings));
  }

  art.communities = detect_communities(art.user_graph);
  art.user_protos = select_prototypes(art.user_graph, art.user_embeddings_raw, art.communities,
                                      cfg.proto.k_proto, cfg.proto.alpha);
  art.user_embeddings =
      refine_embeddings(art.user_embeddings_raw, art.user_protos, refine_options_from(cfg.proto))
          .embeddings;
  art.assignment = compute_assignments(art.user_embeddings, art.user_protos);
  art.market_protos =
      build_all_market_prototypes(art.split.train, art.item_embeddings, market_options_from(cfg));
  return art;
}

PrototypeContext context_for(const RunConfig& cfg, const PipelineArtifacts& art, Variant variant,
                             bool user_side, bool market_side) {
  if (variant == Variant::dgre)
    return make_prototype_context(art.split.train, art.user_protos, art.assignment,
                                  art.market_protos, cfg.head.dim, user_side, market_side,
                                  cfg.head.soft_mixture);
  return plain_context(art.split.train, cfg.head.dim);
}

HeadInit make_head_init(const EmbeddingTable& users,
                        const std::map<MarketId, EmbeddingTable>& items_by_market) {
  // Only item rows seed the heads. User-side structure reaches the heads
  // through the prototype features instead, so the ablation rows differ by
  // exactly that pathway; handing the heads finished user vectors as well
  // would duplicate it and mask the prototypes.
  (void)users;
  HeadInit init;
  std::map<std::int64_t, std::pair<std::vector<double>, int>> acc;
  for (const auto& [mk, tbl] : items_by_market) {
    for (std::size_t r = 0; r < tbl.ids.size(); ++r) {
      auto row = tbl.row(static_cast<int>(r));
      auto& slot = acc[tbl.ids[r]];
      if (slot.first.empty()) slot.first.assign(row.size(), 0.0);
      if (slot.first.size() != row.size())
        throw std::invalid_argument("item embedding dims differ across markets");
      for (std::size_t k = 0; k < row.size(); ++k) slot.first[k] += row[k];
      slot.second += 1;
    }
  }
  for (auto& [id, slot] : acc) {
    for (auto& v : slot.first) v /= static_cast<double>(slot.second);
    init.item_vecs.emplace(id, std::move(slot.first));
  }
  return init;
}

TrainedHeadBundle train_with_context(const RunConfig& cfg, const SplitDataset& split,
                                     HeadKind kind, const PrototypeContext& ctx,
                                     const HeadInit* init) {
  TrainedHeadBundle bundle;
  if (kind.backbone == Backbone::nmf) {
    bundle.gmf_branch =
        train_head(HeadKind{Backbone::gmf, kind.variant}, split, ctx,
                   head_options_from(cfg.head, mix_seed(cfg.seed, "head-gmf")), init);
    bundle.mlp_branch =
        train_head(HeadKind{Backbone::mlp, kind.variant}, split, ctx,
                   head_options_from(cfg.head, mix_seed(cfg.seed, "head-mlp")), init);
    PretrainedBranches pretrained;
    pretrained.gmf = &bundle.gmf_branch->params;
    pretrained.mlp = &bundle.mlp_branch->params;
    bundle.head = train_head(kind, split, ctx,
                             head_options_from(cfg.head, mix_seed(cfg.seed, "head")), init,
                             &pretrained);
  } else {
    bundle.head = train_head(kind, split, ctx,
                             head_options_from(cfg.head, mix_seed(cfg.seed, "head")), init);
  }
  return bundle;
}

RankingMetrics evaluate_with_context(const RunConfig& cfg, const SplitDataset& split,
                                     const HeadParameters& params, const PrototypeContext& ctx) {
  EvalOptions opt;
  opt.k_cutoff = cfg.eval.k_cutoff;
  opt.n_negatives = cfg.eval.n_negatives;
  opt.seed = mix_seed(cfg.seed, "eval");
  return evaluate_head(params, ctx, split, opt);
}

std::vector<LabeledMetrics> run_ablate_embeddings(const RunConfig& cfg,
                                                  const PipelineArtifacts& art) {
  const HeadInit init = make_head_init(art.user_embeddings, art.item_embeddings);
  struct Row {
    const char* label;
    Variant variant;
    bool user_side;
    bool market_side;
  };
  const Row rows[] = {
      {"base", Variant::base, false, false},
      {"shared_only", Variant::dgre, true, false},
      {"market_only", Variant::dgre, false, true},
      {"full", Variant::dgre, true, true},
  };
  std::vector<LabeledMetrics> out;
  for (const auto& row : rows) {
    const auto ctx = context_for(cfg, art, row.variant, row.user_side, row.market_side);
    const auto bundle = train_with_context(cfg, art.split, HeadKind{Backbone::gmf, row.variant},
                                           ctx, row.variant == Variant::dgre ? &init : nullptr);
    out.push_back(
        {row.label, evaluate_with_context(cfg, art.split, bundle.head.params, ctx)});
  }
  return out;
}

std::vector<KSweepRow> run_ablate_k(const RunConfig& cfg, const PipelineArtifacts& art,
                                    const std::string& knob, const std::vector<int>& values) {
  if (knob != "k_proto" && knob != "k_s")
    throw ConfigError("ablate knob must be k_proto or k_s, got '" + knob + "'");
  if (values.empty()) throw ConfigError("ablate needs at least one value");
  std::vector<KSweepRow> out;
  for (int v : values) {
    if (v <= 0) throw ConfigError("ablate values must be positive");
    RunConfig swept = cfg;
    PrototypeContext ctx;
    HeadInit init;
    if (knob == "k_proto") {
      swept.proto.k_proto = v;
      const auto protos = select_prototypes(art.user_graph, art.user_embeddings_raw,
                                            art.communities, v, cfg.proto.alpha);
      const auto refined =
          refine_embeddings(art.user_embeddings_raw, protos, refine_options_from(cfg.proto))
              .embeddings;
      const auto assignment = compute_assignments(refined, protos);
      ctx = make_prototype_context(art.split.train, protos, assignment, art.market_protos,
                                   cfg.head.dim, true, true, cfg.head.soft_mixture);
      init = make_head_init(refined, art.item_embeddings);
    } else {
      swept.proto.k_s = v;
      const auto market_protos = build_all_market_prototypes(art.split.train, art.item_embeddings,
                                                             market_options_from(swept));
      ctx = make_prototype_context(art.split.train, art.user_protos, art.assignment,
                                   market_protos, cfg.head.dim, true, true,
                                   cfg.head.soft_mixture);
      init = make_head_init(art.user_embeddings, art.item_embeddings);
    }
    const auto bundle = train_with_context(swept, art.split, HeadKind{Backbone::gmf, Variant::dgre},
                                           ctx, &init);
    out.push_back({v, evaluate_with_context(swept, art.split, bundle.head.params, ctx)});
  }
  return out;
}

std::vector<std::string> run_synth(const RunConfig& cfg, const RunPaths& paths) {
  validate_config(cfg);
  const Dataset ds = generate_synthetic(synth_config_from(cfg.data), cfg.seed);
  write_interactions_tsv(ds, paths.interactions());
  save_config(cfg, paths.resolved_config());
  write_manifest(paths.manifest("synth"), "synth", cfg.seed, {}, {paths.interactions()});
  return {};
}

std::vector<std::string> run_ingest(const RunConfig& cfg, const RunPaths& paths) {
  validate_config(cfg);
  if (cfg.data.source == "synth")
    throw ConfigError("data.source must name an interaction file for ingest");
  require_artifact(cfg.data.source);
  const Dataset ds =
      load_interactions(cfg.data.source, file_format_from_string(cfg.data.format));
  write_interactions_tsv(ds, paths.interactions());
  save_config(cfg, paths.resolved_config());
  write_manifest(paths.manifest("ingest"), "ingest", cfg.seed, {cfg.data.source},
                 {paths.interactions()});
  return {};
}

std::vector<std::string> run_graphs(const RunConfig& cfg, const RunPaths& paths) {
  validate_config(cfg);
  require_artifact(paths.interactions());
  const Dataset raw = load_interactions(paths.interactions(), FileFormat::canonical_tsv);
  const SplitDataset split = split_filtered(cfg, raw);
  write_interactions_tsv(split.train, paths.train_tsv());
  write_test_instances_tsv(split.test, paths.test_tsv());

  std::vector<std::filesystem::path> outputs{paths.train_tsv(), paths.test_tsv()};
  const auto user_graph = build_user_graph(split.train, cfg.graph.min_common_items);
  write_graph_dump(user_graph, paths.user_graph_edges(), paths.user_graph_nodes());
  outputs.push_back(paths.user_graph_edges());
  outputs.push_back(paths.user_graph_nodes());
  for (const auto& mk : split.train.markets) {
    const auto g = build_item_graph(split.train, mk, cfg.graph.min_common_users);
    write_graph_dump(g, paths.item_graph_edges(mk), paths.item_graph_nodes(mk));
    outputs.push_back(paths.item_graph_edges(mk));
    outputs.push_back(paths.item_graph_nodes(mk));
  }
  save_config(cfg, paths.resolved_config());
  write_manifest(paths.manifest("graphs"), "graphs", cfg.seed, {paths.interactions()}, outputs);
  return {};
}

std::vector<std::string> run_embed(const RunConfig& cfg, const RunPaths& paths) {
  validate_config(cfg);
  require_artifact(paths.train_tsv());
  require_artifact(paths.user_graph_edges());
  require_artifact(paths.user_graph_nodes());
  const Dataset train = load_interactions(paths.train_tsv(), FileFormat::canonical_tsv);
  std::vector<std::string> warnings;

  const auto user_graph = load_graph_dump(paths.user_graph_edges(), paths.user_graph_nodes());
  auto user_res = train_unsupervised(
      user_graph, sage_options_from(cfg.embed, mix_seed(cfg.seed, "embed-user")));
  if (user_res.edgeless)
    warnings.push_back("user graph has no edges; user embeddings are normalized noise");
  write_embeddings_tsv(user_res.embeddings, paths.user_embeddings());
  write_loss_trace_tsv(user_res.epoch_loss, paths.user_embed_loss());

  std::vector<std::filesystem::path> inputs{paths.train_tsv(), paths.user_graph_edges(),
                                            paths.user_graph_nodes()};
  std::vector<std::filesystem::path> outputs{paths.user_embeddings(), paths.user_embed_loss()};
  for (const auto& mk : train.markets) {
    require_artifact(paths.item_graph_edges(mk));
    require_artifact(paths.item_graph_nodes(mk));
    const auto g = load_graph_dump(paths.item_graph_edges(mk), paths.item_graph_nodes(mk));
    auto res = train_unsupervised(
        g, sage_options_from(cfg.embed, mix_seed(cfg.seed, "embed-item-" + mk.code)));
    if (res.edgeless)
      warnings.push_back("item graph for market " + mk.code +
                         " has no edges; its embeddings are normalized noise");
    write_embeddings_tsv(res.embeddings, paths.item_embeddings(mk));
    inputs.push_back(paths.item_graph_edges(mk));
    inputs.push_back(paths.item_graph_nodes(mk));
    outputs.push_back(paths.item_embeddings(mk));
  }
  save_config(cfg, paths.resolved_config());
  write_manifest(paths.manifest("embed"), "embed", cfg.seed, inputs, outputs);
  return warnings;
}

std::vector<std::string> run_prototypes(const RunConfig& cfg, const RunPaths& paths) {
  validate_config(cfg);
  require_artifact(paths.train_tsv());
  require_artifact(paths.user_graph_edges());
  require_artifact(paths.user_graph_nodes());
  require_artifact(paths.user_embeddings());
  const Dataset train = load_interactions(paths.train_tsv(), FileFormat::canonical_tsv);
  const auto user_graph = load_graph_dump(paths.user_graph_edges(), paths.user_graph_nodes());
  const auto user_emb = load_embeddings_tsv(paths.user_embeddings());

  const auto communities = detect_communities(user_graph);
  const auto protos =
      select_prototypes(user_graph, user_emb, communities, cfg.proto.k_proto, cfg.proto.alpha);
  const auto refined =
      refine_embeddings(user_emb, protos, refine_options_from(cfg.proto)).embeddings;
  const auto assignment = compute_assignments(refined, protos);

  const auto item_emb = load_item_embeddings(paths, train);
  const auto market_protos =
      build_all_market_prototypes(train, item_emb, market_options_from(cfg));

  write_user_prototypes_tsv(protos, paths.user_prototypes());
  write_embeddings_tsv(refined, paths.refined_user_embeddings());
  write_assignments_tsv(assignment, paths.assignments());
  write_market_prototypes(market_protos, paths.market_prototypes(), paths.market_items());

  std::vector<std::filesystem::path> inputs{paths.train_tsv(), paths.user_graph_edges(),
                                            paths.user_graph_nodes(), paths.user_embeddings()};
  for (const auto& mk : train.markets) inputs.push_back(paths.item_embeddings(mk));
  save_config(cfg, paths.resolved_config());
  write_manifest(paths.manifest("prototypes"), "prototypes", cfg.seed, inputs,
                 {paths.user_prototypes(), paths.refined_user_embeddings(), paths.assignments(),
                  paths.market_prototypes(), paths.market_items()});
  return market_failure_warnings(market_protos);
}

namespace {

// Shared by run_train and run_eval: rebuild the context (and optionally the
// init tables) a head of this variant needs, from on-disk artifacts.
PrototypeContext context_from_disk(const RunConfig& cfg, const RunPaths& paths,
                                   const Dataset& train, Variant variant, int head_dim,
                                   HeadInit* init_out) {
  if (variant != Variant::dgre) {
    if (init_out != nullptr) *init_out = HeadInit{};
    return plain_context(train, head_dim);
  }
  require_artifact(paths.user_prototypes());
  require_artifact(paths.assignments());
  require_artifact(paths.market_prototypes());
  require_artifact(paths.market_items());
  require_artifact(paths.refined_user_embeddings());
  const auto protos = load_user_prototypes_tsv(paths.user_prototypes(), cfg.proto.alpha);
  const auto assignment = load_assignments_tsv(paths.assignments());
  const auto market_protos =
      load_market_prototypes(paths.market_prototypes(), paths.market_items());
  if (init_out != nullptr) {
    const auto refined = load_embeddings_tsv(paths.refined_user_embeddings());
    *init_out = make_head_init(refined, load_item_embeddings(paths, train));
  }
  return make_prototype_context(train, protos, assignment, market_protos, head_dim, true, true,
                                cfg.head.soft_mixture);
}

}  // namespace

std::vector<std::string> run_train(const RunConfig& cfg, const RunPaths& paths) {
  validate_config(cfg);
  require_artifact(paths.train_tsv());
  require_artifact(paths.test_tsv());
  const SplitDataset split = load_split(paths);
  const HeadKind kind = head_kind_from_config(cfg.head);

  HeadInit init;
  const auto ctx = context_from_disk(cfg, paths, split.train, kind.variant, cfg.head.dim, &init);
  const auto bundle =
      train_with_context(cfg, split, kind, ctx, kind.variant == Variant::dgre ? &init : nullptr);

  save_head(bundle.head.params, paths.head_checkpoint());
  write_loss_trace_tsv(bundle.head.epoch_loss, paths.train_loss());
  std::vector<std::filesystem::path> outputs{paths.head_checkpoint(), paths.train_loss()};
  if (bundle.gmf_branch) {
    save_head(bundle.gmf_branch->params, paths.gmf_branch_checkpoint());
    outputs.push_back(paths.gmf_branch_checkpoint());
  }
  if (bundle.mlp_branch) {
    save_head(bundle.mlp_branch->params, paths.mlp_branch_checkpoint());
    outputs.push_back(paths.mlp_branch_checkpoint());
  }
  std::vector<std::filesystem::path> inputs{paths.train_tsv(), paths.test_tsv()};
  if (kind.variant == Variant::dgre) {
    inputs.push_back(paths.user_prototypes());
    inputs.push_back(paths.assignments());
    inputs.push_back(paths.market_prototypes());
    inputs.push_back(paths.refined_user_embeddings());
  }
  save_config(cfg, paths.resolved_config());
  write_manifest(paths.manifest("train"), "train", cfg.seed, inputs, outputs);
  return {};
}

std::vector<std::string> run_eval(const RunConfig& cfg, const RunPaths& paths) {
  validate_config(cfg);
  require_artifact(paths.head_checkpoint());
  require_artifact(paths.train_tsv());
  require_artifact(paths.test_tsv());
  const SplitDataset split = load_split(paths);
  const HeadParameters params = load_head(paths.head_checkpoint());
  const auto ctx =
      context_from_disk(cfg, paths, split.train, params.kind.variant, params.dim, nullptr);
  const auto metrics = evaluate_with_context(cfg, split, params, ctx);
  write_results_tsv(metrics, cfg.eval.k_cutoff, paths.results());
  save_config(cfg, paths.resolved_config());
  write_manifest(paths.manifest("eval"), "eval", cfg.seed,
                 {paths.head_checkpoint(), paths.train_tsv(), paths.test_tsv()},
                 {paths.results()});
  return metrics.notes;
}

std::vector<std::string> run_ablate_cmd(const RunConfig& cfg, const RunPaths& paths,
                                        const std::string& knob,
                                        const std::vector<int>& values) {
  validate_config(cfg);
  require_artifact(paths.train_tsv());
  require_artifact(paths.test_tsv());
  PipelineArtifacts art;
  art.split = load_split(paths);

  if (knob == "embeddings") {
    require_artifact(paths.user_prototypes());
    require_artifact(paths.assignments());
    require_artifact(paths.market_prototypes());
    require_artifact(paths.market_items());
    require_artifact(paths.refined_user_embeddings());
    art.user_protos = load_user_prototypes_tsv(paths.user_prototypes(), cfg.proto.alpha);
    art.assignment = load_assignments_tsv(paths.assignments());
    art.market_protos = load_market_prototypes(paths.market_prototypes(), paths.market_items());
    art.user_embeddings = load_embeddings_tsv(paths.refined_user_embeddings());
    art.item_embeddings = load_item_embeddings(paths, art.split.train);
    const auto rows = run_ablate_embeddings(cfg, art);
    write_ablate_embeddings_tsv(rows, cfg.eval.k_cutoff, paths.ablate_embeddings_tsv());
    save_config(cfg, paths.resolved_config());
    write_manifest(paths.manifest("ablate"), "ablate", cfg.seed,
                   {paths.train_tsv(), paths.test_tsv(), paths.user_prototypes(),
                    paths.market_prototypes()},
                   {paths.ablate_embeddings_tsv()});
    return {};
  }

  if (knob == "k_proto") {
    require_artifact(paths.user_graph_edges());
    require_artifact(paths.user_graph_nodes());
    require_artifact(paths.user_embeddings());
    require_artifact(paths.market_prototypes());
    require_artifact(paths.market_items());
    art.user_graph = load_graph_dump(paths.user_graph_edges(), paths.user_graph_nodes());
    art.communities = detect_communities(art.user_graph);
    art.user_embeddings_raw = load_embeddings_tsv(paths.user_embeddings());
    art.market_protos = load_market_prototypes(paths.market_prototypes(), paths.market_items());
    art.item_embeddings = load_item_embeddings(paths, art.split.train);
  } else if (knob == "k_s") {
    require_artifact(paths.user_prototypes());
    require_artifact(paths.assignments());
    require_artifact(paths.refined_user_embeddings());
    art.user_protos = load_user_prototypes_tsv(paths.user_prototypes(), cfg.proto.alpha);
    art.assignment = load_assignments_tsv(paths.assignments());
    art.user_embeddings = load_embeddings_tsv(paths.refined_user_embeddings());
    art.item_embeddings = load_item_embeddings(paths, art.split.train);
  } else {
    throw ConfigError("ablate knob must be k_proto, k_s or embeddings, got '" + knob + "'");
  }

  const auto rows = run_ablate_k(cfg, art, knob, values);
  write_ablate_k_tsv(knob, rows, cfg.eval.k_cutoff, paths.ablate_k_tsv(), paths.best_k_txt());
  save_config(cfg, paths.resolved_config());
  write_manifest(paths.manifest("ablate"), "ablate", cfg.seed,
                 {paths.train_tsv(), paths.test_tsv()},
                 {paths.ablate_k_tsv(), paths.best_k_txt()});
  return {};
}

std::vector<std::string> run_all(const RunConfig& cfg, const RunPaths& paths) {
  std::vector<std::string> warnings;
  auto absorb = [&](std::vector<std::string> w) {
    warnings.insert(warnings.end(), w.begin(), w.end());
  };
  if (cfg.data.source == "synth")
    absorb(run_synth(cfg, paths));
  else
    absorb(run_ingest(cfg, paths));
  absorb(run_graphs(cfg, paths));
  absorb(run_embed(cfg, paths));
  absorb(run_prototypes(cfg, paths));
  absorb(run_train(cfg, paths));
  absorb(run_eval(cfg, paths));
  return warnings;
}

void write_ablate_embeddings_tsv(const std::vector<LabeledMetrics>& rows, int k_cutoff,
                                 const std::filesystem::path& path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "row\tmarket\tmetric\tk_cutoff\tvalue\tn_users\n";
  for (const auto& row : rows) {
    auto emit = [&](const std::string& market, const MarketMetrics& mm) {
      out << row.label << '\t' << market << "\thr\t" << k_cutoff << '\t' << fmt9(mm.hr) << '\t'
          << mm.n_users << '\n';
      out << row.label << '\t' << market << "\tndcg\t" << k_cutoff << '\t' << fmt9(mm.ndcg)
          << '\t' << mm.n_users << '\n';
    };
    for (const auto& [mk, mm] : row.metrics.per_market) emit(mk.code, mm);
    emit("overall", row.metrics.overall);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_ablate_k_tsv(const std::string& knob, const std::vector<KSweepRow>& rows,
                        int k_cutoff, const std::filesystem::path& path,
                        const std::filesystem::path& best_path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << knob << "\tmarket\tmetric\tk_cutoff\tvalue\tn_users\n";
  for (const auto& row : rows) {
    auto emit = [&](const std::string& market, const MarketMetrics& mm) {
      out << row.value << '\t' << market << "\thr\t" << k_cutoff << '\t' << fmt9(mm.hr) << '\t'
          << mm.n_users << '\n';
      out << row.value << '\t' << market << "\tndcg\t" << k_cutoff << '\t' << fmt9(mm.ndcg)
          << '\t' << mm.n_users << '\n';
    };
    for (const auto& [mk, mm] : row.metrics.per_market) emit(mk.code, mm);
    emit("overall", row.metrics.overall);
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());

  const KSweepRow* best = nullptr;
  for (const auto& row : rows)
    if (best == nullptr || row.metrics.overall.ndcg > best->metrics.overall.ndcg) best = &row;
  std::ofstream bout(best_path);
  if (!bout) throw std::runtime_error("cannot open " + best_path.string() + " for writing");
  bout << "best " << knob << " by overall ndcg@" << k_cutoff << ": " << best->value
       << " (ndcg " << fmt9(best->metrics.overall.ndcg) << ")\n";
}

}  // namespace dgre
