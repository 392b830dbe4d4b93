#include "dgre/community.hpp"

#include <map>
#include <stdexcept>
#include <unordered_map>

namespace dgre {

double modularity(const InteractionGraph& g, const std::vector<int>& assignment) {
  if (assignment.size() != static_cast<std::size_t>(g.n_nodes()))
    throw std::invalid_argument("modularity: assignment size != node count");
  if (g.edge_count == 0) return 0.0;
  const double two_m = 2.0 * static_cast<double>(g.edge_count);
  double q = 0.0;
  // Edge part: sum A_ij over same-community ordered pairs.
  for (int v = 0; v < g.n_nodes(); ++v)
    for (int u : g.adj[v])
      if (assignment[v] == assignment[u]) q += 1.0;
  // Degree part: sum over communities of (sum of degrees)^2 / 2m.
  std::unordered_map<int, double> deg_sum;
  for (int v = 0; v < g.n_nodes(); ++v) deg_sum[assignment[v]] += g.degrees[v];
  for (const auto& [c, s] : deg_sum) q -= s * s / two_m;
  return q / two_m;
}

CommunityPartition detect_communities(const InteractionGraph& g) {
  const int n = g.n_nodes();
  CommunityPartition part;
  part.assignment.resize(n);
  if (n == 0) return part;

  std::vector<int> comm(n);
  for (int v = 0; v < n; ++v) comm[v] = v;
  std::vector<double> tot(n, 0.0);  // degree mass per community
  for (int v = 0; v < n; ++v) tot[v] = g.degrees[v];
  const double m = static_cast<double>(g.edge_count);

  if (m > 0.0) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (int v = 0; v < n; ++v) {
        if (g.adj[v].empty()) continue;
        int old_c = comm[v];
        tot[old_c] -= g.degrees[v];
        // Edge counts from v into each adjacent community.
        std::map<int, double> k_in;
        k_in[old_c] += 0.0;
        for (int u : g.adj[v]) k_in[comm[u]] += 1.0;
        double best_gain = k_in[old_c] / m - tot[old_c] * g.degrees[v] / (2.0 * m * m);
        int best_c = old_c;
        for (const auto& [c, kin] : k_in) {
          if (c == old_c) continue;
          double gain = kin / m - tot[c] * g.degrees[v] / (2.0 * m * m);
          if (gain > best_gain + 1e-12) {
            best_gain = gain;
            best_c = c;
          }
        }
        tot[best_c] += g.degrees[v];
        comm[v] = best_c;
        if (best_c != old_c) moved = true;
      }
    }
  }

  // Relabel contiguous in order of first appearance along the node order.
  std::unordered_map<int, int> relabel;
  for (int v = 0; v < n; ++v) {
    auto it = relabel.emplace(comm[v], static_cast<int>(relabel.size())).first;
    part.assignment[v] = it->second;
  }
  part.n_communities = static_cast<int>(relabel.size());
  return part;
}

}  // namespace dgre
