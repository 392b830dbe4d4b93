#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dgre/community.hpp"
#include "dgre/sage.hpp"
#include "dgre/tensor.hpp"

namespace dgre {

// Zero vectors have similarity 0 to everything.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Market-shared behavior prototypes: one landmark user per large community,
// scored by modularity-weighted similarity to its own community.
struct UserPrototypeSet {
  std::vector<std::vector<double>> prototypes;  // k x d, embedding snapshots
  std::vector<std::int64_t> source_nodes;
  double alpha = 1.0;
};

// Picks k landmark users. Communities are ranked by size (ties toward the
// lower community index); inside each the node with the highest score
//   s(v) = sum over community members j != v of (A_vj - d_v d_j / 2m) cos(v, j)
// wins, ties toward the smaller node id. When fewer than k communities exist
// the shortfall is filled with the best-scoring remaining nodes overall.
UserPrototypeSet select_prototypes(const InteractionGraph& g, const EmbeddingTable& e,
                                   const CommunityPartition& part, int k, double alpha = 1.0);

// Student-t kernel responsibilities of every embedding row against the
// prototypes; each row sums to 1.
Tensor2 soft_assign_rows(const Tensor2& e, const std::vector<std::vector<double>>& prototypes,
                         double alpha);
struct SoftAssignment {
  std::vector<std::int64_t> row_ids;  // follows the embedding table's order
  Tensor2 w;
  Tensor2 w_sharp;
};
Tensor2 soft_assign(const EmbeddingTable& e, const UserPrototypeSet& protos);

// Second-power target distribution normalized by column frequency. Columns
// whose mass is zero stay zero and drop out of the row normalization.
Tensor2 sharpen(const Tensor2& w);

SoftAssignment compute_assignments(const EmbeddingTable& e, const UserPrototypeSet& protos);

// KL(w_sharp || w). Terms with w_sharp = 0 contribute nothing; w = 0 under
// positive w_sharp is a support violation and throws.
double clustering_loss(const Tensor2& w, const Tensor2& w_sharp);

// Gradient of clustering_loss with respect to the embedding rows, prototypes
// and the target w_sharp held fixed.
Tensor2 clustering_grad_rows(const Tensor2& e, const std::vector<std::vector<double>>& prototypes,
                             double alpha, const Tensor2& w_sharp);

struct RefineOptions {
  int steps = 20;
  double lr = 0.05;
  int refresh_interval = 10;  // target redo cadence; frozen in between
};

struct RefineResult {
  EmbeddingTable embeddings;
  std::vector<double> loss_trace;  // loss entering each step
};

// Gradient descent on the sharpened-target KL with prototypes frozen. The
// target is recomputed every refresh_interval steps from the current rows.
RefineResult refine_embeddings(const EmbeddingTable& e, const UserPrototypeSet& protos,
                               const RefineOptions& opt);

// Row argmax, ties toward the smaller prototype index.
int assign_prototype(const Tensor2& w, int row);

}  // namespace dgre
