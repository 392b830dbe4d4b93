#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dgre/community.hpp"
#include "dgre/config.hpp"
#include "dgre/data.hpp"
#include "dgre/eval.hpp"
#include "dgre/graph.hpp"
#include "dgre/heads.hpp"
#include "dgre/market_prototypes.hpp"
#include "dgre/sage.hpp"
#include "dgre/user_prototypes.hpp"

namespace dgre {

// Artifact layout inside one run directory. Every stage reads its inputs and
// writes its outputs strictly through these paths.
struct RunPaths {
  std::filesystem::path root;

  explicit RunPaths(std::filesystem::path r) : root(std::move(r)) {}

  std::filesystem::path resolved_config() const { return root / "config.resolved.toml"; }
  std::filesystem::path manifest(const std::string& stage) const {
    return root / "manifests" / (stage + ".json");
  }
  std::filesystem::path interactions() const { return root / "data" / "interactions.tsv"; }
  std::filesystem::path train_tsv() const { return root / "data" / "train.tsv"; }
  std::filesystem::path test_tsv() const { return root / "data" / "test.tsv"; }
  std::filesystem::path user_graph_edges() const {
    return root / "graphs" / "user_graph.edges.tsv";
  }
  std::filesystem::path user_graph_nodes() const {
    return root / "graphs" / "user_graph.nodes.tsv";
  }
  std::filesystem::path item_graph_edges(const MarketId& m) const {
    return root / "graphs" / ("item_graph." + m.code + ".edges.tsv");
  }
  std::filesystem::path item_graph_nodes(const MarketId& m) const {
    return root / "graphs" / ("item_graph." + m.code + ".nodes.tsv");
  }
  std::filesystem::path user_embeddings() const {
    return root / "embeddings" / "user_embeddings.tsv";
  }
  std::filesystem::path user_embed_loss() const {
    return root / "embeddings" / "user_embed_loss.tsv";
  }
  std::filesystem::path item_embeddings(const MarketId& m) const {
    return root / "embeddings" / ("item_embeddings." + m.code + ".tsv");
  }
  std::filesystem::path refined_user_embeddings() const {
    return root / "prototypes" / "user_embeddings_refined.tsv";
  }
  std::filesystem::path user_prototypes() const {
    return root / "prototypes" / "user_prototypes.tsv";
  }
  std::filesystem::path assignments() const { return root / "prototypes" / "assignments.tsv"; }
  std::filesystem::path market_prototypes() const {
    return root / "prototypes" / "market_prototypes.tsv";
  }
  std::filesystem::path market_items() const { return root / "prototypes" / "market_items.tsv"; }
  std::filesystem::path head_checkpoint() const { return root / "model" / "head.ckpt"; }
  std::filesystem::path gmf_branch_checkpoint() const {
    return root / "model" / "gmf_branch.ckpt";
  }
  std::filesystem::path mlp_branch_checkpoint() const {
    return root / "model" / "mlp_branch.ckpt";
  }
  std::filesystem::path train_loss() const { return root / "model" / "train_loss.tsv"; }
  std::filesystem::path results() const { return root / "results" / "results.tsv"; }
  std::filesystem::path ablate_k_tsv() const { return root / "results" / "ablate_k.tsv"; }
  std::filesystem::path best_k_txt() const { return root / "results" / "best_k.txt"; }
  std::filesystem::path ablate_embeddings_tsv() const {
    return root / "results" / "ablate_embeddings.tsv";
  }
};

// Everything the later stages consume, kept in memory. Mirrors the on-disk
// artifacts one-to-one.
struct PipelineArtifacts {
  Dataset raw;
  SplitDataset split;
  InteractionGraph user_graph;
  std::map<MarketId, InteractionGraph> item_graphs;
  CommunityPartition communities;
  EmbeddingTable user_embeddings_raw;  // encoder output, before refinement
  EmbeddingTable user_embeddings;      // after clustering refinement
  std::map<MarketId, EmbeddingTable> item_embeddings;
  UserPrototypeSet user_protos;
  SoftAssignment assignment;
  MarketPrototypes market_protos;
  bool user_graph_edgeless = false;
};

// Runs data -> graphs -> embeddings -> prototypes without touching disk.
PipelineArtifacts build_pipeline(const RunConfig& cfg);

HeadKind head_kind_from_config(const HeadConfig& head);

// Context for a head of the given variant: base and market_aware heads get
// the all-ones context, dgre heads get prototype lookups per the side flags.
PrototypeContext context_for(const RunConfig& cfg, const PipelineArtifacts& art, Variant variant,
                             bool user_side, bool market_side);

// Graph-embedding initialization: users from the refined table, items from
// the mean of their per-market embeddings.
HeadInit make_head_init(const EmbeddingTable& users,
                        const std::map<MarketId, EmbeddingTable>& items_by_market);

struct TrainedHeadBundle {
  HeadTrainResult head;
  std::optional<HeadTrainResult> gmf_branch;  // filled for the fused backbone
  std::optional<HeadTrainResult> mlp_branch;
};

// Trains the head described by kind under the given context; handles branch
// pretraining for the fused backbone. init applies to dgre variants only.
TrainedHeadBundle train_with_context(const RunConfig& cfg, const SplitDataset& split,
                                     HeadKind kind, const PrototypeContext& ctx,
                                     const HeadInit* init);

RankingMetrics evaluate_with_context(const RunConfig& cfg, const SplitDataset& split,
                                     const HeadParameters& params, const PrototypeContext& ctx);

struct LabeledMetrics {
  std::string label;
  RankingMetrics metrics;
};

// The four-row prototype on/off study on a fixed gmf backbone: base,
// shared_only, market_only, full.
std::vector<LabeledMetrics> run_ablate_embeddings(const RunConfig& cfg,
                                                  const PipelineArtifacts& art);

struct KSweepRow {
  int value = 0;
  RankingMetrics metrics;
};

// Sweeps proto.k_proto or proto.k_s, rebuilding the affected prototype stage
// and retraining the head per value. Embeddings and graphs are reused.
std::vector<KSweepRow> run_ablate_k(const RunConfig& cfg, const PipelineArtifacts& art,
                                    const std::string& knob, const std::vector<int>& values);

// Disk-to-disk stages. Each validates its upstream artifacts (MissingArtifact
// on absence), writes its outputs plus a manifest, and echoes the resolved
// config. Returned strings are human-readable warnings.
std::vector<std::string> run_synth(const RunConfig& cfg, const RunPaths& paths);
std::vector<std::string> run_ingest(const RunConfig& cfg, const RunPaths& paths);
std::vector<std::string> run_graphs(const RunConfig& cfg, const RunPaths& paths);
std::vector<std::string> run_embed(const RunConfig& cfg, const RunPaths& paths);
std::vector<std::string> run_prototypes(const RunConfig& cfg, const RunPaths& paths);
std::vector<std::string> run_train(const RunConfig& cfg, const RunPaths& paths);
std::vector<std::string> run_eval(const RunConfig& cfg, const RunPaths& paths);
std::vector<std::string> run_ablate_cmd(const RunConfig& cfg, const RunPaths& paths,
                                        const std::string& knob, const std::vector<int>& values);
std::vector<std::string> run_all(const RunConfig& cfg, const RunPaths& paths);

void write_ablate_embeddings_tsv(const std::vector<LabeledMetrics>& rows, int k_cutoff,
                                 const std::filesystem::path& path);
void write_ablate_k_tsv(const std::string& knob, const std::vector<KSweepRow>& rows,
                        int k_cutoff, const std::filesystem::path& path,
                        const std::filesystem::path& best_path);

}  // namespace dgre
