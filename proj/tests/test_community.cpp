#include <functional>
#include <vector>

#include "dgre/community.hpp"
#include "dgre/rng.hpp"
#include "doctest.h"

using namespace dgre;

namespace {

// Ordered-pair definition, diagonal included: the degree products of a
// community enter for every (i, j) with matching labels.
double brute_modularity(const InteractionGraph& g, const std::vector<int>& assignment) {
  if (g.edge_count == 0) return 0.0;
  const double two_m = 2.0 * static_cast<double>(g.edge_count);
  double q = 0.0;
  for (int i = 0; i < g.n_nodes(); ++i)
    for (int j = 0; j < g.n_nodes(); ++j) {
      if (assignment[i] != assignment[j]) continue;
      double a_ij = (i != j && g.has_edge(i, j)) ? 1.0 : 0.0;
      q += a_ij - g.degrees[i] * static_cast<double>(g.degrees[j]) / two_m;
    }
  return q / two_m;
}

// Every set partition of n nodes, as restricted growth strings.
void for_each_partition(int n, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> a(n, 0);
  std::function<void(int, int)> rec = [&](int i, int max_used) {
    if (i == n) {
      fn(a);
      return;
    }
    for (int c = 0; c <= max_used + 1; ++c) {
      a[i] = c;
      rec(i + 1, std::max(max_used, c));
    }
  };
  rec(1, 0);
}

InteractionGraph two_triangles() {
  return graph_from_edges({0, 1, 2, 3, 4, 5},
                          {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}, {2, 3}});
}

InteractionGraph random_graph(Rng& rng, int n, double p) {
  std::vector<std::int64_t> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (rng.uniform() < p) edges.push_back({i, j});
  return graph_from_edges(ids, edges);
}

}  // namespace

TEST_SUITE("communities") {

TEST_CASE("modularity matches the ordered-pair oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 8; ++trial) {
    auto g = random_graph(rng, 9, 0.35);
    std::vector<int> labels(g.n_nodes());
    for (auto& c : labels) c = static_cast<int>(rng.uniform_int(3));
    CHECK(modularity(g, labels) == doctest::Approx(brute_modularity(g, labels)).epsilon(1e-12));
  }
}

TEST_CASE("edgeless graphs have zero modularity and singleton communities") {
  auto g = graph_from_edges({7, 8, 9}, {});
  CHECK(modularity(g, {0, 1, 2}) == 0.0);
  auto part = detect_communities(g);
  CHECK(part.n_communities == 3);
}

TEST_CASE("detection reaches the optimum over every partition of two triangles") {
  auto g = two_triangles();
  double best = -1.0;
  for_each_partition(g.n_nodes(), [&](const std::vector<int>& labels) {
    best = std::max(best, modularity(g, labels));
  });

  auto part = detect_communities(g);
  CHECK(modularity(g, part.assignment) == doctest::Approx(best).epsilon(1e-12));
  CHECK(part.n_communities == 2);
  CHECK(part.assignment[0] == part.assignment[1]);
  CHECK(part.assignment[1] == part.assignment[2]);
  CHECK(part.assignment[3] == part.assignment[4]);
  CHECK(part.assignment[4] == part.assignment[5]);
  CHECK(part.assignment[0] != part.assignment[3]);
}

TEST_CASE("detected partitions beat the trivial ones and are deterministic") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    auto g = random_graph(rng, 12, 0.3);
    if (g.edge_count == 0) continue;
    auto part = detect_communities(g);
    double q = modularity(g, part.assignment);
    std::vector<int> one(g.n_nodes(), 0);
    std::vector<int> singletons(g.n_nodes());
    for (int v = 0; v < g.n_nodes(); ++v) singletons[v] = v;
    CHECK(q >= modularity(g, one) - 1e-12);
    CHECK(q >= modularity(g, singletons) - 1e-12);

    auto again = detect_communities(g);
    CHECK(part.assignment == again.assignment);

    // Labels are contiguous from zero.
    for (int c : part.assignment) {
      CHECK(c >= 0);
      CHECK(c < part.n_communities);
    }
  }
}

}  // TEST_SUITE
