#include "dgre/graph.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace dgre {

int InteractionGraph::index_of(std::int64_t id) const {
  auto it = node_index.find(id);
  if (it == node_index.end())
    throw std::out_of_range("unknown node " + std::to_string(id));
  return it->second;
}

bool InteractionGraph::has_edge(int i, int j) const {
  const auto& a = adj[i];
  return std::binary_search(a.begin(), a.end(), j);
}

InteractionGraph graph_from_edges(std::vector<std::int64_t> node_ids,
                                  const std::vector<std::pair<int, int>>& edges) {
  InteractionGraph g;
  g.node_ids = std::move(node_ids);
  for (std::size_t i = 0; i < g.node_ids.size(); ++i)
    if (!g.node_index.emplace(g.node_ids[i], static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate node id " + std::to_string(g.node_ids[i]));
  g.adj.resize(g.node_ids.size());
  for (auto [i, j] : edges) {
    if (i == j) throw std::invalid_argument("self loop on node index " + std::to_string(i));
    if (i < 0 || j < 0 || i >= g.n_nodes() || j >= g.n_nodes())
      throw std::invalid_argument("edge endpoint out of range");
    g.adj[i].push_back(j);
    g.adj[j].push_back(i);
  }
  for (auto& a : g.adj) {
    std::sort(a.begin(), a.end());
    if (std::adjacent_find(a.begin(), a.end()) != a.end())
      throw std::invalid_argument("duplicate edge in edge list");
  }
  g.degrees.resize(g.adj.size());
  for (std::size_t i = 0; i < g.adj.size(); ++i) g.degrees[i] = static_cast<int>(g.adj[i].size());
  for (int d : g.degrees) g.edge_count += d;
  g.edge_count /= 2;
  return g;
}

namespace {

// Shared co-occurrence construction: nodes with posting lists of partners,
// edge when the pairwise overlap count reaches the threshold. Posting lists
// are the inverted index of the interaction log, so cost tracks the number of
// co-occurring pairs instead of n^2 node pairs.
InteractionGraph build_cooccurrence_graph(std::vector<std::int64_t> node_ids,
                                          const std::vector<std::vector<int>>& postings,
                                          int threshold) {
  if (threshold < 1) throw std::invalid_argument("co-occurrence threshold must be >= 1");
  std::map<std::pair<int, int>, int> pair_counts;
  for (const auto& list : postings) {
    for (std::size_t a = 0; a < list.size(); ++a)
      for (std::size_t b = a + 1; b < list.size(); ++b) {
        int i = list[a], j = list[b];
        if (i > j) std::swap(i, j);
        ++pair_counts[{i, j}];
      }
  }
  std::vector<std::pair<int, int>> edges;
  for (const auto& [pair, count] : pair_counts)
    if (count >= threshold) edges.push_back(pair);
  return graph_from_edges(std::move(node_ids), edges);
}

}  // namespace

InteractionGraph build_user_graph(const Dataset& train, int min_common_items) {
  std::vector<std::int64_t> node_ids(train.users.begin(), train.users.end());
  std::unordered_map<UserId, int> index;
  for (std::size_t i = 0; i < node_ids.size(); ++i) index[node_ids[i]] = static_cast<int>(i);
  std::unordered_map<ItemId, std::vector<int>> by_item;
  for (const auto& r : train.interactions) by_item[r.item].push_back(index.at(r.user));
  std::vector<std::vector<int>> postings;
  postings.reserve(by_item.size());
  for (auto& [item, users] : by_item) {
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    postings.push_back(std::move(users));
  }
  return build_cooccurrence_graph(std::move(node_ids), postings, min_common_items);
}

InteractionGraph build_item_graph(const Dataset& train, const MarketId& market,
                                  int min_common_users) {
  if (!train.market_users.count(market))
    throw std::out_of_range("unknown market '" + market.code + "'");
  std::map<ItemId, std::vector<UserId>> by_item;
  for (const auto& r : train.interactions)
    if (r.market == market) by_item[r.item].push_back(r.user);
  std::vector<std::int64_t> node_ids;
  node_ids.reserve(by_item.size());
  for (const auto& [item, users] : by_item) node_ids.push_back(item);
  std::unordered_map<ItemId, int> index;
  for (std::size_t i = 0; i < node_ids.size(); ++i) index[node_ids[i]] = static_cast<int>(i);
  std::unordered_map<UserId, std::vector<int>> by_user;
  for (const auto& [item, users] : by_item)
    for (UserId u : users) by_user[u].push_back(index.at(item));
  std::vector<std::vector<int>> postings;
  postings.reserve(by_user.size());
  for (auto& [u, its] : by_user) {
    std::sort(its.begin(), its.end());
    its.erase(std::unique(its.begin(), its.end()), its.end());
    postings.push_back(std::move(its));
  }
  return build_cooccurrence_graph(std::move(node_ids), postings, min_common_users);
}

std::vector<std::int64_t> neighbors(const InteractionGraph& g, std::int64_t v) {
  int idx = g.index_of(v);
  std::vector<std::int64_t> out;
  out.reserve(g.adj[idx].size());
  for (int j : g.adj[idx]) out.push_back(g.node_ids[j]);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace dgre
