#include "dgre/user_prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dgre {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine_similarity: length mismatch " +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double na = l2_norm(a), nb = l2_norm(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

UserPrototypeSet select_prototypes(const InteractionGraph& g, const EmbeddingTable& e,
                                   const CommunityPartition& part, int k, double alpha) {
  const int n = g.n_nodes();
  if (k < 1) throw std::invalid_argument("select_prototypes: k must be >= 1");
  if (k > n)
    throw std::invalid_argument("select_prototypes: k = " + std::to_string(k) +
                                " exceeds " + std::to_string(n) + " nodes");
  if (alpha <= 0.0) throw std::invalid_argument("select_prototypes: alpha must be > 0");
  if (part.assignment.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("select_prototypes: partition size != node count");

  const double m = static_cast<double>(g.edge_count);
  std::vector<std::vector<int>> members(part.n_communities);
  for (int v = 0; v < n; ++v) members[part.assignment[v]].push_back(v);

  // Landmark score confined to the node's own community, self term excluded.
  std::vector<double> score(n, 0.0);
  for (int v = 0; v < n; ++v) {
    auto ev = e.at(g.node_ids[v]);
    double s = 0.0;
    for (int j : members[part.assignment[v]]) {
      if (j == v) continue;
      double a_vj = g.has_edge(v, j) ? 1.0 : 0.0;
      double expected = m > 0.0 ? g.degrees[v] * static_cast<double>(g.degrees[j]) / (2.0 * m) : 0.0;
      s += (a_vj - expected) * cosine_similarity(ev, e.at(g.node_ids[j]));
    }
    score[v] = s;
  }

  std::vector<int> comm_order(part.n_communities);
  for (int c = 0; c < part.n_communities; ++c) comm_order[c] = c;
  std::stable_sort(comm_order.begin(), comm_order.end(), [&](int a, int b) {
    return members[a].size() > members[b].size();
  });

  std::vector<int> chosen;
  std::vector<char> is_chosen(n, 0);
  for (int c : comm_order) {
    if (static_cast<int>(chosen.size()) == k) break;
    int best = -1;
    for (int v : members[c])
      if (best == -1 || score[v] > score[best] ||
          (score[v] == score[best] && g.node_ids[v] < g.node_ids[best]))
        best = v;
    if (best != -1) {
      chosen.push_back(best);
      is_chosen[best] = 1;
    }
  }
  // Fewer communities than k: top up with the best remaining nodes anywhere.
  if (static_cast<int>(chosen.size()) < k) {
    std::vector<int> rest;
    for (int v = 0; v < n; ++v)
      if (!is_chosen[v]) rest.push_back(v);
    std::stable_sort(rest.begin(), rest.end(), [&](int a, int b) {
      if (score[a] != score[b]) return score[a] > score[b];
      return g.node_ids[a] < g.node_ids[b];
    });
    for (int v : rest) {
      if (static_cast<int>(chosen.size()) == k) break;
      chosen.push_back(v);
    }
  }

  UserPrototypeSet out;
  out.alpha = alpha;
  for (int v : chosen) {
    auto ev = e.at(g.node_ids[v]);
    out.prototypes.emplace_back(ev.begin(), ev.end());
    out.source_nodes.push_back(g.node_ids[v]);
  }
  return out;
}

Tensor2 soft_assign_rows(const Tensor2& e, const std::vector<std::vector<double>>& prototypes,
                         double alpha) {
  if (prototypes.empty()) throw std::invalid_argument("soft_assign: no prototypes");
  const int k = static_cast<int>(prototypes.size());
  for (const auto& p : prototypes)
    if (static_cast<int>(p.size()) != e.cols)
      throw std::invalid_argument("soft_assign: prototype dim " + std::to_string(p.size()) +
                                  " != embedding dim " + std::to_string(e.cols));
  Tensor2 w(e.rows, k);
  const double power = -(alpha + 1.0) / 2.0;
  for (int j = 0; j < e.rows; ++j) {
    double denom = 0.0;
    for (int c = 0; c < k; ++c) {
      double d2 = squared_distance(e.row(j), prototypes[c]);
      double kernel = std::pow(1.0 + d2 / alpha, power);
      w(j, c) = kernel;
      denom += kernel;
    }
    for (int c = 0; c < k; ++c) w(j, c) /= denom;
  }
  return w;
}

Tensor2 soft_assign(const EmbeddingTable& e, const UserPrototypeSet& protos) {
  Tensor2 rows(e.n_rows(), e.dim);
  std::copy(e.data.begin(), e.data.end(), rows.data.begin());
  return soft_assign_rows(rows, protos.prototypes, protos.alpha);
}

Tensor2 sharpen(const Tensor2& w) {
  Tensor2 out(w.rows, w.cols);
  std::vector<double> freq(w.cols, 0.0);
  for (int j = 0; j < w.rows; ++j)
    for (int c = 0; c < w.cols; ++c) freq[c] += w(j, c);
  for (int j = 0; j < w.rows; ++j) {
    double denom = 0.0;
    for (int c = 0; c < w.cols; ++c) {
      if (freq[c] == 0.0) continue;  // empty column stays out of the target
      out(j, c) = w(j, c) * w(j, c) / freq[c];
      denom += out(j, c);
    }
    if (denom > 0.0)
      for (int c = 0; c < w.cols; ++c) out(j, c) /= denom;
  }
  return out;
}

SoftAssignment compute_assignments(const EmbeddingTable& e, const UserPrototypeSet& protos) {
  SoftAssignment a;
  a.row_ids = e.ids;
  a.w = soft_assign(e, protos);
  a.w_sharp = sharpen(a.w);
  return a;
}

double clustering_loss(const Tensor2& w, const Tensor2& w_sharp) {
  if (!w.same_shape(w_sharp))
    throw std::invalid_argument("clustering_loss: shape mismatch " + shape_str(w) + " vs " +
                                shape_str(w_sharp));
  double loss = 0.0;
  for (std::size_t i = 0; i < w.data.size(); ++i) {
    double target = w_sharp.data[i];
    if (target == 0.0) continue;
    double source = w.data[i];
    if (source <= 0.0)
      throw std::domain_error("clustering_loss: zero assignment under positive target");
    loss += target * std::log(target / source);
  }
  return loss;
}

Tensor2 clustering_grad_rows(const Tensor2& e, const std::vector<std::vector<double>>& prototypes,
                             double alpha, const Tensor2& w_sharp) {
  Tensor2 w = soft_assign_rows(e, prototypes, alpha);
  if (!w.same_shape(w_sharp))
    throw std::invalid_argument("clustering_grad: target shape " + shape_str(w_sharp) +
                                " != assignment shape " + shape_str(w));
  Tensor2 grad(e.rows, e.cols);
  const double factor = (alpha + 1.0) / alpha;
  for (int j = 0; j < e.rows; ++j) {
    auto ej = e.row(j);
    auto gj = grad.row(j);
    for (int c = 0; c < w.cols; ++c) {
      double d2 = squared_distance(ej, prototypes[c]);
      double coeff = factor * (w_sharp(j, c) - w(j, c)) / (1.0 + d2 / alpha);
      for (int t = 0; t < e.cols; ++t) gj[t] += coeff * (ej[t] - prototypes[c][t]);
    }
  }
  return grad;
}

RefineResult refine_embeddings(const EmbeddingTable& e, const UserPrototypeSet& protos,
                               const RefineOptions& opt) {
  if (opt.steps < 0 || opt.refresh_interval < 1)
    throw std::invalid_argument("refine_embeddings: bad options");
  Tensor2 rows(e.n_rows(), e.dim);
  std::copy(e.data.begin(), e.data.end(), rows.data.begin());

  RefineResult result;
  Tensor2 target;
  for (int step = 0; step < opt.steps; ++step) {
    Tensor2 w = soft_assign_rows(rows, protos.prototypes, protos.alpha);
    if (step % opt.refresh_interval == 0) target = sharpen(w);
    result.loss_trace.push_back(clustering_loss(w, target));
    Tensor2 grad = clustering_grad_rows(rows, protos.prototypes, protos.alpha, target);
    for (std::size_t i = 0; i < rows.data.size(); ++i) rows.data[i] -= opt.lr * grad.data[i];
  }

  result.embeddings = EmbeddingTable::zeros(e.ids, e.dim);
  std::copy(rows.data.begin(), rows.data.end(), result.embeddings.data.begin());
  return result;
}

int assign_prototype(const Tensor2& w, int row) {
  if (row < 0 || row >= w.rows) throw std::out_of_range("assign_prototype: bad row");
  int best = 0;
  for (int c = 1; c < w.cols; ++c)
    if (w(row, c) > w(row, best)) best = c;
  return best;
}

}  // namespace dgre
