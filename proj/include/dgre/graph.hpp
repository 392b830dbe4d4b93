#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dgre/data.hpp"

namespace dgre {

// Undirected co-interaction graph over users or items. Nodes are addressed
// both by original id and by dense index; adjacency lists hold indices and
// stay sorted. No self loops, every edge counted once in edge_count.
struct InteractionGraph {
  std::vector<std::int64_t> node_ids;
  std::unordered_map<std::int64_t, int> node_index;
  std::vector<std::vector<int>> adj;
  std::vector<int> degrees;
  std::int64_t edge_count = 0;

  int index_of(std::int64_t id) const;
  bool has_edge(int i, int j) const;
  int n_nodes() const { return static_cast<int>(node_ids.size()); }
};

InteractionGraph graph_from_edges(std::vector<std::int64_t> node_ids,
                                  const std::vector<std::pair<int, int>>& edges);

// Users across all markets; an edge connects two users sharing at least
// min_common_items items. Users without any qualifying partner stay in the
// graph as isolated nodes.
InteractionGraph build_user_graph(const Dataset& train, int min_common_items = 2);

// Items interacted with inside one market; an edge connects two items sharing
// at least min_common_users users of that market.
InteractionGraph build_item_graph(const Dataset& train, const MarketId& market,
                                  int min_common_users = 2);

// Sorted original ids adjacent to v. Unknown node id throws.
std::vector<std::int64_t> neighbors(const InteractionGraph& g, std::int64_t v);

}  // namespace dgre
