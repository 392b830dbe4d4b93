#include "dgre/sage.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dgre/optim.hpp"

namespace dgre {

EmbeddingTable EmbeddingTable::zeros(std::vector<std::int64_t> ids_in, int dim_in) {
  EmbeddingTable t;
  t.dim = dim_in;
  t.ids = std::move(ids_in);
  for (std::size_t i = 0; i < t.ids.size(); ++i)
    if (!t.index.emplace(t.ids[i], static_cast<int>(i)).second)
      throw std::invalid_argument("duplicate embedding id " + std::to_string(t.ids[i]));
  t.data.assign(t.ids.size() * static_cast<std::size_t>(dim_in), 0.0);
  return t;
}

std::span<const double> EmbeddingTable::at(std::int64_t id) const {
  auto it = index.find(id);
  if (it == index.end()) throw std::out_of_range("unknown embedding id " + std::to_string(id));
  return row(it->second);
}

std::span<double> EmbeddingTable::at(std::int64_t id) {
  auto it = index.find(id);
  if (it == index.end()) throw std::out_of_range("unknown embedding id " + std::to_string(id));
  return row(it->second);
}

std::vector<double> aggregate_mean(const std::vector<std::vector<double>>& xs, int dim) {
  std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
  if (xs.empty()) return out;
  for (const auto& x : xs) {
    if (static_cast<int>(x.size()) != dim)
      throw std::invalid_argument("aggregate_mean: vector length " + std::to_string(x.size()) +
                                  " does not match dim " + std::to_string(dim));
    for (int j = 0; j < dim; ++j) out[j] += x[j];
  }
  double inv = 1.0 / static_cast<double>(xs.size());
  for (double& v : out) v *= inv;
  return out;
}

namespace {

std::vector<int> sample_neighbors(const std::vector<int>& nbrs, int sample_size, Rng& rng) {
  if (static_cast<int>(nbrs.size()) <= sample_size)
    return nbrs;  // full neighborhood, no draw consumed
  auto picks = rng.sample_without_replacement(nbrs.size(), static_cast<std::size_t>(sample_size));
  std::vector<int> out;
  out.reserve(picks.size());
  for (std::size_t p : picks) out.push_back(nbrs[p]);
  return out;
}

Tensor2 table_matrix(const InteractionGraph& g, const EmbeddingTable& e) {
  Tensor2 m(g.n_nodes(), e.dim);
  for (int v = 0; v < g.n_nodes(); ++v) {
    auto src = e.at(g.node_ids[v]);
    std::copy(src.begin(), src.end(), m.row(v).begin());
  }
  return m;
}

EmbeddingTable matrix_table(const InteractionGraph& g, const Tensor2& m) {
  EmbeddingTable t = EmbeddingTable::zeros(g.node_ids, m.cols);
  std::copy(m.data.begin(), m.data.end(), t.data.begin());
  return t;
}

// Forward pass over the whole graph on a frozen plan; keeps every
// intermediate needed by the backward sweep.
struct ForwardCache {
  std::vector<Tensor2> h;    // h[0] = e0, h[k] after layer k
  std::vector<Tensor2> x;    // x[k-1] = [self ; mean] inputs of layer k
  std::vector<Tensor2> pre;  // pre[k-1] = W_k * x before activation
  Tensor2 z;                 // normalized h[L]
  std::vector<double> norms;
};

ForwardCache forward_pass(const InteractionGraph& g, const Tensor2& e0,
                          const SageParameters& params, const SamplePlan& plan) {
  if (e0.rows != g.n_nodes()) throw std::invalid_argument("forward_pass: e0 rows != node count");
  if (plan.sampled.size() != params.layers.size())
    throw std::invalid_argument("forward_pass: plan depth != layer count");
  ForwardCache c;
  c.h.push_back(e0);
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const Tensor2& w = params.layers[k].weight;
    const Tensor2& prev = c.h.back();
    if (w.cols != 2 * prev.cols)
      throw std::invalid_argument("layer " + std::to_string(k + 1) + ": weight " + shape_str(w) +
                                  " expects input of " + std::to_string(w.cols / 2));
    Tensor2 x(g.n_nodes(), 2 * prev.cols);
    for (int v = 0; v < g.n_nodes(); ++v) {
      auto xr = x.row(v);
      auto self = prev.row(v);
      std::copy(self.begin(), self.end(), xr.begin());
      const auto& s = plan.sampled[k][v];
      if (!s.empty()) {
        double inv = 1.0 / static_cast<double>(s.size());
        for (int u : s) {
          auto nb = prev.row(u);
          for (int j = 0; j < prev.cols; ++j) xr[prev.cols + j] += nb[j];
        }
        for (int j = 0; j < prev.cols; ++j) xr[prev.cols + j] *= inv;
      }
    }
    Tensor2 pre(g.n_nodes(), w.rows);
    Tensor2 h(g.n_nodes(), w.rows);
    for (int v = 0; v < g.n_nodes(); ++v) {
      auto pv = matvec(w, x.row(v));
      std::copy(pv.begin(), pv.end(), pre.row(v).begin());
      auto hv = h.row(v);
      if (params.layers[k].act == Activation::relu)
        for (int j = 0; j < w.rows; ++j) hv[j] = relu(pv[j]);
      else
        std::copy(pv.begin(), pv.end(), hv.begin());
    }
    c.x.push_back(std::move(x));
    c.pre.push_back(std::move(pre));
    c.h.push_back(std::move(h));
  }
  const Tensor2& last = c.h.back();
  c.z = last;
  c.norms.assign(g.n_nodes(), 0.0);
  for (int v = 0; v < g.n_nodes(); ++v) {
    double n = l2_norm(last.row(v));
    c.norms[v] = n;
    if (n > 1e-12) {
      auto zr = c.z.row(v);
      for (double& val : zr) val /= n;
    }
  }
  return c;
}

}  // namespace

SamplePlan make_sample_plan(const InteractionGraph& g, int n_layers, int sample_size, Rng& rng) {
  SamplePlan plan;
  plan.sampled.resize(static_cast<std::size_t>(n_layers));
  for (auto& layer : plan.sampled) {
    layer.resize(static_cast<std::size_t>(g.n_nodes()));
    for (int v = 0; v < g.n_nodes(); ++v) layer[v] = sample_neighbors(g.adj[v], sample_size, rng);
  }
  return plan;
}

EmbeddingTable sage_layer(const InteractionGraph& g, const EmbeddingTable& e,
                          const SageLayer& layer, int sample_size, Rng& rng) {
  Tensor2 prev = table_matrix(g, e);
  SageParameters one;
  one.layers.push_back(layer);
  SamplePlan plan = make_sample_plan(g, 1, sample_size, rng);
  if (layer.weight.cols != 2 * prev.cols)
    throw std::invalid_argument("sage_layer: weight " + shape_str(layer.weight) +
                                " expects input of " + std::to_string(layer.weight.cols / 2));
  ForwardCache c = forward_pass(g, prev, one, plan);
  return matrix_table(g, c.h.back());
}

Tensor2 encode_with_plan(const InteractionGraph& g, const Tensor2& e0,
                         const SageParameters& params, const SamplePlan& plan) {
  return forward_pass(g, e0, params, plan).z;
}

EmbeddingTable encode(const InteractionGraph& g, const EmbeddingTable& e0,
                      const SageParameters& params, Rng& rng) {
  Tensor2 m = table_matrix(g, e0);
  SamplePlan plan = make_sample_plan(g, static_cast<int>(params.layers.size()),
                                     params.sample_size, rng);
  Tensor2 z = encode_with_plan(g, m, params, plan);
  return matrix_table(g, z);
}

double link_loss_with_gradients(const InteractionGraph& g, const Tensor2& e0,
                                const SageParameters& params, const SamplePlan& plan,
                                const EdgeBatch& batch, Tensor2* d_e0,
                                std::vector<Tensor2>* d_w) {
  if (batch.edges.size() != batch.negatives.size())
    throw std::invalid_argument("link_loss: edges/negatives size mismatch");
  ForwardCache c = forward_pass(g, e0, params, plan);
  const double scale = batch.edges.empty() ? 0.0 : 1.0 / static_cast<double>(batch.edges.size());

  double loss = 0.0;
  Tensor2 dz(g.n_nodes(), c.z.cols);
  const bool want_grads = d_e0 != nullptr || d_w != nullptr;
  for (std::size_t e = 0; e < batch.edges.size(); ++e) {
    auto [u, v] = batch.edges[e];
    auto zu = c.z.row(u);
    auto zv = c.z.row(v);
    double s = dot(zu, zv);
    loss += -std::log(clamp_prob(sigmoid(s)));
    if (want_grads) {
      double ds = (sigmoid(s) - 1.0) * scale;
      auto du = dz.row(u);
      auto dvr = dz.row(v);
      for (int j = 0; j < c.z.cols; ++j) {
        du[j] += ds * zv[j];
        dvr[j] += ds * zu[j];
      }
    }
    for (int nidx : batch.negatives[e]) {
      auto zn = c.z.row(nidx);
      double t = dot(zu, zn);
      loss += -std::log(clamp_prob(sigmoid(-t)));
      if (want_grads) {
        double dt = sigmoid(t) * scale;
        auto du = dz.row(u);
        auto dn = dz.row(nidx);
        for (int j = 0; j < c.z.cols; ++j) {
          du[j] += dt * zn[j];
          dn[j] += dt * zu[j];
        }
      }
    }
  }
  loss *= scale;
  if (!want_grads) return loss;

  // Through the row normalization: dh = (dz - (dz . z) z) / |h|.
  const std::size_t L = params.layers.size();
  Tensor2 dh = dz;
  for (int v = 0; v < g.n_nodes(); ++v) {
    if (c.norms[v] <= 1e-12) continue;  // identity when the row stayed unnormalized
    auto zr = c.z.row(v);
    auto dr = dh.row(v);
    double proj = dot(dz.row(v), zr);
    for (int j = 0; j < dh.cols; ++j) dr[j] = (dz(v, j) - proj * zr[j]) / c.norms[v];
  }

  std::vector<Tensor2> dws(L);
  for (std::size_t k = 0; k < L; ++k)
    dws[k] = Tensor2(params.layers[k].weight.rows, params.layers[k].weight.cols);
  for (std::size_t k = L; k-- > 0;) {
    const Tensor2& w = params.layers[k].weight;
    const int d_in = w.cols / 2;
    Tensor2 dprev(g.n_nodes(), d_in);
    for (int v = 0; v < g.n_nodes(); ++v) {
      std::vector<double> da(static_cast<std::size_t>(w.rows));
      auto dhv = dh.row(v);
      auto prev_pre = c.pre[k].row(v);
      if (params.layers[k].act == Activation::relu) {
        for (int j = 0; j < w.rows; ++j) da[j] = prev_pre[j] > 0.0 ? dhv[j] : 0.0;
      } else {
        std::copy(dhv.begin(), dhv.end(), da.begin());
      }
      auto xv = c.x[k].row(v);
      for (int i = 0; i < w.rows; ++i) {
        if (da[i] == 0.0) continue;
        auto dwr = dws[k].row(i);
        for (int j = 0; j < w.cols; ++j) dwr[j] += da[i] * xv[j];
      }
      auto dx = matvec_transposed(w, da);
      auto dpv = dprev.row(v);
      for (int j = 0; j < d_in; ++j) dpv[j] += dx[j];
      const auto& s = plan.sampled[k][v];
      if (!s.empty()) {
        double inv = 1.0 / static_cast<double>(s.size());
        for (int u : s) {
          auto dpu = dprev.row(u);
          for (int j = 0; j < d_in; ++j) dpu[j] += inv * dx[d_in + j];
        }
      }
    }
    dh = std::move(dprev);
  }
  if (d_w != nullptr) *d_w = std::move(dws);
  if (d_e0 != nullptr) *d_e0 = std::move(dh);
  return loss;
}

SageTrainResult train_unsupervised(const InteractionGraph& g, const SageTrainOptions& opt) {
  if (opt.dim < 1 || opt.n_layers < 0 || opt.sample_size < 1 || opt.epochs < 0)
    throw std::invalid_argument("train_unsupervised: bad options");
  Rng rng(mix_seed(opt.seed, "sage-train"));
  const int n = g.n_nodes();

  Tensor2 e0(n, opt.dim);
  for (double& v : e0.data) v = rng.normal(0.0, 0.1);

  SageParameters params;
  params.sample_size = opt.sample_size;
  for (int k = 0; k < opt.n_layers; ++k) {
    SageLayer layer;
    int fan_in = 2 * opt.dim;
    layer.weight = Tensor2(opt.dim, fan_in);
    double std = std::sqrt(2.0 / static_cast<double>(fan_in + opt.dim));
    for (double& v : layer.weight.data) v = rng.normal(0.0, std);
    layer.act = (k + 1 == opt.n_layers) ? Activation::identity : Activation::relu;
    params.layers.push_back(std::move(layer));
  }

  std::vector<std::pair<int, int>> all_edges;
  for (int v = 0; v < n; ++v)
    for (int u : g.adj[v])
      if (v < u) all_edges.emplace_back(v, u);

  SageTrainResult result;
  if (all_edges.empty()) {
    for (int v = 0; v < n; ++v) {
      auto row = e0.row(v);
      double norm = l2_norm(row);
      if (norm > 1e-12)
        for (double& val : row) val /= norm;
    }
    result.embeddings = matrix_table(g, e0);
    result.params = std::move(params);
    result.edgeless = true;
    return result;
  }

  // Negative candidates per anchor: everything outside N(u) and u itself.
  std::vector<std::vector<int>> non_neighbors(n);
  auto non_neighbors_of = [&](int u) -> const std::vector<int>& {
    auto& cached = non_neighbors[u];
    if (cached.empty() && g.degrees[u] + 1 < n) {
      std::vector<char> blocked(static_cast<std::size_t>(n), 0);
      blocked[u] = 1;
      for (int w : g.adj[u]) blocked[w] = 1;
      for (int w = 0; w < n; ++w)
        if (!blocked[w]) cached.push_back(w);
    }
    return cached;
  };

  std::size_t flat_size = e0.data.size();
  for (const auto& l : params.layers) flat_size += l.weight.data.size();
  std::vector<double> flat(flat_size), grad_flat(flat_size);
  AdamState adam;
  AdamOptions adam_opt;
  adam_opt.lr = opt.lr;

  const int batch_edges = std::max(1, opt.batch_edges);
  std::vector<std::size_t> order(all_edges.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_edges) {
      std::size_t stop = std::min(order.size(), start + batch_edges);
      EdgeBatch batch;
      batch.edges.reserve(stop - start);
      batch.negatives.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        auto [u, v] = all_edges[order[i]];
        batch.edges.emplace_back(u, v);
        const auto& pool = non_neighbors_of(u);
        std::vector<int> negs;
        if (!pool.empty()) {
          negs.reserve(static_cast<std::size_t>(opt.neg_per_pos));
          for (int j = 0; j < opt.neg_per_pos; ++j)
            negs.push_back(pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))]);
        }
        batch.negatives.push_back(std::move(negs));
      }
      SamplePlan plan = make_sample_plan(g, opt.n_layers, opt.sample_size, rng);
      Tensor2 d_e0;
      std::vector<Tensor2> d_w;
      double loss = link_loss_with_gradients(g, e0, params, plan, batch, &d_e0, &d_w);
      loss_sum += loss * static_cast<double>(batch.edges.size());

      std::size_t off = 0;
      for (std::size_t k = 0; k < params.layers.size(); ++k) {
        auto& wd = params.layers[k].weight.data;
        std::copy(wd.begin(), wd.end(), flat.begin() + off);
        std::copy(d_w[k].data.begin(), d_w[k].data.end(), grad_flat.begin() + off);
        off += wd.size();
      }
      std::copy(e0.data.begin(), e0.data.end(), flat.begin() + off);
      std::copy(d_e0.data.begin(), d_e0.data.end(), grad_flat.begin() + off);

      if (opt.optimizer == SageOptimizer::adam)
        adam_step(flat, grad_flat, adam, adam_opt);
      else
        sgd_step(flat, grad_flat, opt.lr);

      off = 0;
      for (auto& layer : params.layers) {
        std::copy(flat.begin() + off, flat.begin() + off + layer.weight.data.size(),
                  layer.weight.data.begin());
        off += layer.weight.data.size();
      }
      std::copy(flat.begin() + off, flat.end(), e0.data.begin());
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(all_edges.size()));
  }

  SamplePlan plan = make_sample_plan(g, opt.n_layers, opt.sample_size, rng);
  Tensor2 z = encode_with_plan(g, e0, params, plan);
  result.embeddings = matrix_table(g, z);
  result.params = std::move(params);
  return result;
}

}  // namespace dgre
