#include "dgre/market_prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dgre/optim.hpp"
#include "dgre/parallel.hpp"

namespace dgre {

double Discriminator::score(std::span<const double> q_i, std::span<const double> q_n) const {
  auto mv = matvec(m, q_n);
  return dot(q_i, mv) + bias;
}

std::vector<double> neighborhood_mean(const InteractionGraph& g, const EmbeddingTable& q,
                                      ItemId item) {
  int idx = g.index_of(item);
  std::vector<double> out(static_cast<std::size_t>(q.dim), 0.0);
  const auto& nbrs = g.adj[idx];
  if (nbrs.empty()) return out;
  for (int j : nbrs) {
    auto row = q.at(g.node_ids[j]);
    for (int t = 0; t < q.dim; ++t) out[t] += row[t];
  }
  double inv = 1.0 / static_cast<double>(nbrs.size());
  for (double& v : out) v *= inv;
  return out;
}

double mi_estimate(const Discriminator& disc, const InteractionGraph& g,
                   const EmbeddingTable& q, ItemId item,
                   std::span<const ItemId> negative_pool, Rng& rng, int max_negatives) {
  if (negative_pool.empty()) throw std::invalid_argument("mi_estimate: empty negative pool");
  auto q_i = q.at(item);
  auto q_ni = neighborhood_mean(g, q, item);
  double pos = std::log(clamp_prob(sigmoid(disc.score(q_i, q_ni))));

  std::vector<ItemId> negs;
  if (max_negatives > 0 && static_cast<std::size_t>(max_negatives) < negative_pool.size()) {
    auto picks = rng.sample_without_replacement(negative_pool.size(),
                                                static_cast<std::size_t>(max_negatives));
    negs.reserve(picks.size());
    for (std::size_t p : picks) negs.push_back(negative_pool[p]);
  } else {
    negs.assign(negative_pool.begin(), negative_pool.end());
  }
  double neg_sum = 0.0;
  for (ItemId j : negs) {
    auto q_nj = neighborhood_mean(g, q, j);
    neg_sum += std::log(clamp_prob(1.0 - sigmoid(disc.score(q_i, q_nj))));
  }
  return pos + neg_sum / static_cast<double>(negs.size());
}

double disc_item_objective(const Discriminator& disc, std::span<const double> q_i,
                           std::span<const double> q_pos,
                           const std::vector<std::vector<double>>& q_negs,
                           std::span<double> grad_out) {
  if (q_negs.empty()) throw std::invalid_argument("disc_item_objective: no negatives");
  const int d = static_cast<int>(q_i.size());
  const bool want_grad = !grad_out.empty();
  if (want_grad) {
    if (grad_out.size() != static_cast<std::size_t>(d) * d + 1)
      throw std::invalid_argument("disc_item_objective: gradient buffer size mismatch");
    std::fill(grad_out.begin(), grad_out.end(), 0.0);
  }

  double s_pos = disc.score(q_i, q_pos);
  double obj = std::log(clamp_prob(sigmoid(s_pos)));
  if (want_grad) {
    double d_pos = sigmoid(s_pos) - 1.0;
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c)
        grad_out[static_cast<std::size_t>(r) * d + c] += d_pos * q_i[r] * q_pos[c];
    grad_out.back() += d_pos;
  }

  const double inv_neg = 1.0 / static_cast<double>(q_negs.size());
  for (const auto& q_nj : q_negs) {
    double s_neg = disc.score(q_i, q_nj);
    obj += inv_neg * std::log(clamp_prob(1.0 - sigmoid(s_neg)));
    if (want_grad) {
      double d_neg = sigmoid(s_neg) * inv_neg;
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          grad_out[static_cast<std::size_t>(r) * d + c] += d_neg * q_i[r] * q_nj[c];
      grad_out.back() += d_neg;
    }
  }
  return obj;
}

namespace {

std::vector<int> non_isolated_nodes(const InteractionGraph& g) {
  std::vector<int> out;
  for (int v = 0; v < g.n_nodes(); ++v)
    if (!g.adj[v].empty()) out.push_back(v);
  return out;
}

}  // namespace

DiscTrainResult train_discriminator(const InteractionGraph& g, const EmbeddingTable& q,
                                    const DiscTrainOptions& opt) {
  auto active = non_isolated_nodes(g);
  if (active.size() < 2)
    throw std::runtime_error("train_discriminator: needs at least 2 non-isolated items, found " +
                             std::to_string(active.size()));
  if (opt.neg_per_pos < 1) throw std::invalid_argument("train_discriminator: neg_per_pos >= 1");

  const int d = q.dim;
  Rng rng(mix_seed(opt.seed, "disc-train"));

  // Neighborhood summaries are fixed by the graph, compute them once.
  std::vector<std::vector<double>> n_mean(active.size());
  for (std::size_t a = 0; a < active.size(); ++a)
    n_mean[a] = neighborhood_mean(g, q, g.node_ids[active[a]]);

  DiscTrainResult result;
  result.disc.m = Tensor2(d, d);  // zero start scores everything at T = 0
  result.disc.bias = 0.0;

  std::vector<double> flat(static_cast<std::size_t>(d) * d + 1, 0.0);
  std::vector<double> grad(flat.size());
  AdamState adam;
  AdamOptions adam_opt;
  adam_opt.lr = opt.lr;

  std::vector<std::size_t> order(active.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double obj_sum = 0.0;
    for (std::size_t pos : order) {
      auto q_i = q.at(g.node_ids[active[pos]]);
      std::vector<std::vector<double>> q_negs(static_cast<std::size_t>(opt.neg_per_pos));
      for (auto& q_nj : q_negs) {
        std::size_t ni;
        do {
          ni = static_cast<std::size_t>(rng.uniform_int(active.size()));
        } while (ni == pos);
        q_nj = n_mean[ni];
      }
      // Ascent via minimizing the negated objective.
      obj_sum += disc_item_objective(result.disc, q_i, n_mean[pos], q_negs, grad);

      std::copy(result.disc.m.data.begin(), result.disc.m.data.end(), flat.begin());
      flat.back() = result.disc.bias;
      adam_step(flat, grad, adam, adam_opt);
      std::copy(flat.begin(), flat.end() - 1, result.disc.m.data.begin());
      result.disc.bias = flat.back();
    }
    result.epoch_objective.push_back(obj_sum / static_cast<double>(active.size()));
  }
  return result;
}

std::vector<ItemScore> select_items(const InteractionGraph& g, const EmbeddingTable& q,
                                    const Discriminator& disc, int k_s) {
  if (k_s < 1) throw std::invalid_argument("select_items: k_s must be >= 1");
  if (g.n_nodes() == 0) throw std::runtime_error("select_items: empty item graph");
  if (k_s > g.n_nodes())
    throw std::runtime_error("select_items: k_s = " + std::to_string(k_s) + " exceeds " +
                             std::to_string(g.n_nodes()) + " items");
  auto active = non_isolated_nodes(g);

  // Deterministic scoring: full pool of other non-isolated items.
  std::vector<ItemScore> scored(active.size());
  std::vector<ItemId> pool_all(active.size());
  for (std::size_t a = 0; a < active.size(); ++a) pool_all[a] = g.node_ids[active[a]];
  parallel_for(static_cast<int>(active.size()), [&](int a) {
    ItemId id = g.node_ids[active[static_cast<std::size_t>(a)]];
    std::vector<ItemId> pool;
    pool.reserve(pool_all.size() - 1);
    for (ItemId other : pool_all)
      if (other != id) pool.push_back(other);
    Rng local(0);
    double score = pool.empty() ? 0.0 : mi_estimate(disc, g, q, id, pool, local, 0);
    scored[static_cast<std::size_t>(a)] = {id, score};
  });
  std::sort(scored.begin(), scored.end(), [](const ItemScore& a, const ItemScore& b) {
    if (a.mi != b.mi) return a.mi > b.mi;
    return a.item < b.item;
  });
  if (static_cast<int>(scored.size()) > k_s) scored.resize(static_cast<std::size_t>(k_s));

  if (static_cast<int>(scored.size()) < k_s) {
    // Pad from isolated items, largest embedding norm first.
    std::vector<std::pair<double, ItemId>> iso;
    for (int v = 0; v < g.n_nodes(); ++v)
      if (g.adj[v].empty()) iso.emplace_back(l2_norm(q.at(g.node_ids[v])), g.node_ids[v]);
    std::sort(iso.begin(), iso.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (const auto& [norm, id] : iso) {
      if (static_cast<int>(scored.size()) == k_s) break;
      scored.push_back({id, 0.0});
    }
  }
  return scored;
}

MarketPrototype pool_prototype(const MarketId& market, const std::vector<ItemScore>& selected,
                               const EmbeddingTable& q) {
  if (selected.empty()) throw std::invalid_argument("pool_prototype: empty selection");
  MarketPrototype proto;
  proto.market = market;
  proto.selected = selected;
  proto.vec.assign(static_cast<std::size_t>(q.dim), 0.0);
  double weight_sum = 0.0;
  for (const auto& s : selected) weight_sum += s.mi;
  if (std::fabs(weight_sum) < 1e-9) {
    for (const auto& s : selected) {
      auto row = q.at(s.item);
      for (int t = 0; t < q.dim; ++t) proto.vec[t] += row[t];
    }
    double inv = 1.0 / static_cast<double>(selected.size());
    for (double& v : proto.vec) v *= inv;
  } else {
    for (const auto& s : selected) {
      auto row = q.at(s.item);
      for (int t = 0; t < q.dim; ++t) proto.vec[t] += s.mi * row[t];
    }
    for (double& v : proto.vec) v /= weight_sum;
  }
  return proto;
}

MarketPrototypes build_all_market_prototypes(const Dataset& train,
                                             const std::map<MarketId, EmbeddingTable>& q_by_market,
                                             const MarketProtoOptions& opt) {
  MarketPrototypes out;
  std::vector<MarketId> markets = train.markets;
  std::vector<MarketPrototype> protos(markets.size());
  std::vector<std::string> errors(markets.size());
  parallel_for(static_cast<int>(markets.size()), [&](int i) {
    const MarketId& market = markets[static_cast<std::size_t>(i)];
    try {
      auto qit = q_by_market.find(market);
      if (qit == q_by_market.end())
        throw std::runtime_error("no item embeddings for market '" + market.code + "'");
      InteractionGraph g = build_item_graph(train, market, opt.min_common_users);
      DiscTrainResult disc = train_discriminator(g, qit->second, opt.disc);
      auto selected = select_items(g, qit->second, disc.disc, opt.k_s);
      protos[static_cast<std::size_t>(i)] = pool_prototype(market, selected, qit->second);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  });
  for (std::size_t i = 0; i < markets.size(); ++i) {
    if (!errors[i].empty())
      out.failures.emplace_back(markets[i], errors[i]);
    else
      out.by_market.emplace(markets[i], std::move(protos[i]));
  }
  return out;
}

}  // namespace dgre
