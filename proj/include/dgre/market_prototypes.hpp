#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dgre/data.hpp"
#include "dgre/graph.hpp"
#include "dgre/rng.hpp"
#include "dgre/sage.hpp"
#include "dgre/tensor.hpp"

namespace dgre {

// Bilinear scorer over an item embedding and a neighborhood summary:
// T(q_i, q_N) = q_i^T M q_N + bias.
struct Discriminator {
  Tensor2 m;
  double bias = 0.0;

  double score(std::span<const double> q_i, std::span<const double> q_n) const;
};

// Mean embedding of an item's graph neighbors; zero vector when isolated.
std::vector<double> neighborhood_mean(const InteractionGraph& g, const EmbeddingTable& q,
                                      ItemId item);

// Mutual-information style score of one item against its own neighborhood:
//   log s(T(q_i, q_Ni)) + mean over negatives j of log(1 - s(T(q_i, q_Nj))).
// Negatives come from negative_pool; max_negatives = 0 uses the whole pool
// deterministically, otherwise that many are drawn without replacement.
double mi_estimate(const Discriminator& disc, const InteractionGraph& g,
                   const EmbeddingTable& q, ItemId item,
                   std::span<const ItemId> negative_pool, Rng& rng, int max_negatives = 0);

// One item's estimate against fixed neighborhood summaries:
//   log s(T(q_i, q_pos)) + mean over j of log(1 - s(T(q_i, q_negs[j]))).
// A non-empty grad_out (d*d + 1 slots) receives the gradient of the negated
// estimate: m row major, bias in the last slot.
double disc_item_objective(const Discriminator& disc, std::span<const double> q_i,
                           std::span<const double> q_pos,
                           const std::vector<std::vector<double>>& q_negs,
                           std::span<double> grad_out);

struct DiscTrainOptions {
  int epochs = 10;
  double lr = 0.01;
  int neg_per_pos = 5;
  std::uint64_t seed = 0;
};

struct DiscTrainResult {
  Discriminator disc;
  std::vector<double> epoch_objective;  // mean per-item estimate per epoch
};

// Gradient ascent on the summed estimates over all non-isolated items.
// Negative neighborhoods are drawn from other non-isolated items.
DiscTrainResult train_discriminator(const InteractionGraph& g, const EmbeddingTable& q,
                                    const DiscTrainOptions& opt);

struct ItemScore {
  ItemId item = 0;
  double mi = 0.0;

  bool operator==(const ItemScore&) const = default;
};

// Scores every non-isolated item against the full pool and keeps the k_s
// best (ties toward the smaller item id). If k_s exceeds the non-isolated
// count the remainder is filled with isolated items by descending embedding
// norm.
std::vector<ItemScore> select_items(const InteractionGraph& g, const EmbeddingTable& q,
                                    const Discriminator& disc, int k_s);

struct MarketPrototype {
  MarketId market;
  std::vector<double> vec;
  std::vector<ItemScore> selected;
};

// Score-weighted pooling of the selected embeddings; a score sum within
// 1e-9 of zero falls back to the unweighted mean.
MarketPrototype pool_prototype(const MarketId& market, const std::vector<ItemScore>& selected,
                               const EmbeddingTable& q);

struct MarketProtoOptions {
  int k_s = 10;
  int min_common_users = 2;
  DiscTrainOptions disc;
};

struct MarketPrototypes {
  std::map<MarketId, MarketPrototype> by_market;
  std::vector<std::pair<MarketId, std::string>> failures;
};

// Runs the per-market stage independently for every market in train; a market
// that fails is reported and the rest proceed.
MarketPrototypes build_all_market_prototypes(const Dataset& train,
                                             const std::map<MarketId, EmbeddingTable>& q_by_market,
                                             const MarketProtoOptions& opt);

}  // namespace dgre
