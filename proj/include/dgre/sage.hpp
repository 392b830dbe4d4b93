#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dgre/graph.hpp"
#include "dgre/rng.hpp"
#include "dgre/tensor.hpp"

namespace dgre {

// Per-node dense vectors addressed by original node id.
struct EmbeddingTable {
  int dim = 0;
  std::vector<std::int64_t> ids;
  std::unordered_map<std::int64_t, int> index;
  std::vector<double> data;  // ids.size() x dim, row-major

  static EmbeddingTable zeros(std::vector<std::int64_t> ids, int dim);

  std::span<const double> at(std::int64_t id) const;
  std::span<double> at(std::int64_t id);
  std::span<const double> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * dim, static_cast<std::size_t>(dim)}; }
  std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * dim, static_cast<std::size_t>(dim)}; }
  int n_rows() const { return static_cast<int>(ids.size()); }
};

enum class Activation { relu, identity };

struct SageLayer {
  Tensor2 weight;  // d_out x 2*d_in, applied to [self ; neighborhood mean]
  Activation act = Activation::relu;
};

struct SageParameters {
  std::vector<SageLayer> layers;
  int sample_size = 10;
};

// Elementwise mean of equal-length vectors; empty input gives a zero vector
// of length dim.
std::vector<double> aggregate_mean(const std::vector<std::vector<double>>& xs, int dim);

// One propagation step: for every node, sample min(sample_size, |N(v)|)
// neighbors without replacement, mean their embeddings and apply the layer to
// [e_v ; mean].
EmbeddingTable sage_layer(const InteractionGraph& g, const EmbeddingTable& e,
                          const SageLayer& layer, int sample_size, Rng& rng);

// Composes all layers and L2-normalizes the result. Zero layers returns the
// normalized input.
EmbeddingTable encode(const InteractionGraph& g, const EmbeddingTable& e0,
                      const SageParameters& params, Rng& rng);

// Frozen neighbor draws for one forward pass: sampled[k][v] lists the node
// indices feeding v's layer-(k+1) aggregation. Keeping the plan explicit lets
// gradient checks re-evaluate the same stochastic function.
struct SamplePlan {
  std::vector<std::vector<std::vector<int>>> sampled;
};

SamplePlan make_sample_plan(const InteractionGraph& g, int n_layers, int sample_size, Rng& rng);

// Link-prediction batch: positive edges plus per-edge negative node indices
// paired with the edge's first endpoint.
struct EdgeBatch {
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> negatives;
};

// Mean per-edge loss: -log s(z_u . z_v) - sum_neg log s(-z_u . z_neg).
// When gradient outputs are non-null they receive d(loss)/d(e0) and
// d(loss)/d(W_k) for the fixed plan and batch.
double link_loss_with_gradients(const InteractionGraph& g, const Tensor2& e0,
                                const SageParameters& params, const SamplePlan& plan,
                                const EdgeBatch& batch, Tensor2* d_e0,
                                std::vector<Tensor2>* d_w);

// Encode on a fixed plan, exposed for the loss above and for equivariance
// tests. Rows of the result are L2-normalized.
Tensor2 encode_with_plan(const InteractionGraph& g, const Tensor2& e0,
                         const SageParameters& params, const SamplePlan& plan);

enum class SageOptimizer { adam, sgd };

struct SageTrainOptions {
  int dim = 32;
  int n_layers = 2;
  int sample_size = 10;
  int epochs = 20;
  double lr = 0.01;
  int neg_per_pos = 5;
  int batch_edges = 8192;
  SageOptimizer optimizer = SageOptimizer::adam;
  std::uint64_t seed = 0;
};

struct SageTrainResult {
  EmbeddingTable embeddings;
  SageParameters params;
  std::vector<double> epoch_loss;
  bool edgeless = false;  // graph had no edges; embeddings are normalized noise
};

// Unsupervised training on the graph's own edges: connected nodes are pulled
// together, sampled non-neighbors pushed apart. E0 and the layer weights are
// trained jointly; the result holds the final encode output.
SageTrainResult train_unsupervised(const InteractionGraph& g, const SageTrainOptions& opt);

}  // namespace dgre
