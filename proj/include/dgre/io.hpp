#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dgre/data.hpp"
#include "dgre/eval.hpp"
#include "dgre/graph.hpp"
#include "dgre/market_prototypes.hpp"
#include "dgre/sage.hpp"
#include "dgre/user_prototypes.hpp"

namespace dgre {

// A pipeline stage was asked to read an upstream artifact that is not there.
// The CLI maps this to exit code 2.
struct MissingArtifact : std::runtime_error {
  explicit MissingArtifact(const std::filesystem::path& p)
      : std::runtime_error("missing artifact: " + p.string()), path(p) {}
  std::filesystem::path path;
};

void require_artifact(const std::filesystem::path& p);

std::uint64_t fnv1a_hash(std::string_view bytes);
std::uint64_t hash_file(const std::filesystem::path& p);

// One manifest per stage: stage name, format version, seed, input file
// hashes, output file names. No timestamps, so reruns are byte-identical.
void write_manifest(const std::filesystem::path& path, const std::string& stage,
                    std::uint64_t seed, const std::vector<std::filesystem::path>& inputs,
                    const std::vector<std::filesystem::path>& outputs);

void write_embeddings_tsv(const EmbeddingTable& e, const std::filesystem::path& path);
EmbeddingTable load_embeddings_tsv(const std::filesystem::path& path);

void write_graph_dump(const InteractionGraph& g, const std::filesystem::path& edges_path,
                      const std::filesystem::path& node_index_path);
InteractionGraph load_graph_dump(const std::filesystem::path& edges_path,
                                 const std::filesystem::path& node_index_path);

void write_test_instances_tsv(const std::vector<TestInstance>& test,
                              const std::filesystem::path& path);
std::vector<TestInstance> load_test_instances_tsv(const std::filesystem::path& path);

void write_user_prototypes_tsv(const UserPrototypeSet& protos, const std::filesystem::path& path);
UserPrototypeSet load_user_prototypes_tsv(const std::filesystem::path& path, double alpha);

void write_assignments_tsv(const SoftAssignment& a, const std::filesystem::path& path);
SoftAssignment load_assignments_tsv(const std::filesystem::path& path);

void write_market_prototypes(const MarketPrototypes& protos,
                             const std::filesystem::path& proto_path,
                             const std::filesystem::path& items_path);
MarketPrototypes load_market_prototypes(const std::filesystem::path& proto_path,
                                        const std::filesystem::path& items_path);

// `market<TAB>metric<TAB>k_cutoff<TAB>value<TAB>n_users`, with a pooled row
// under the market name "overall".
void write_results_tsv(const RankingMetrics& metrics, int k_cutoff,
                       const std::filesystem::path& path);

void write_loss_trace_tsv(const std::vector<double>& loss, const std::filesystem::path& path);

}  // namespace dgre
