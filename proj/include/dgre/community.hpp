#pragma once

#include <vector>

#include "dgre/graph.hpp"

namespace dgre {

struct CommunityPartition {
  std::vector<int> assignment;  // node index -> community, contiguous from 0
  int n_communities = 0;
};

// Newman modularity of an assignment: (1/2m) sum_ij (A_ij - d_i d_j / 2m)
// over same-community pairs. Zero for an edgeless graph.
double modularity(const InteractionGraph& g, const std::vector<int>& assignment);

// Greedy modularity maximization by single-node moves: sweep the nodes in
// index order, moving each to the adjacent community with the largest
// positive gain, until a full sweep changes nothing. Isolated nodes end up
// as singletons. Deterministic for a fixed node order.
CommunityPartition detect_communities(const InteractionGraph& g);

}  // namespace dgre
