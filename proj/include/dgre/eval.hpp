#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dgre/data.hpp"
#include "dgre/heads.hpp"

namespace dgre {

using Scorer = std::function<double(UserId, ItemId)>;

// Rank of the held-out item among itself plus the negatives, with pessimistic
// tie handling: every negative scoring >= the held-out item pushes it down.
// Duplicate candidates are rejected.
int rank_candidates(const Scorer& scorer, UserId user, ItemId held_out,
                    std::span<const ItemId> negatives);

double hr_at_k(int rank, int k);
double ndcg_at_k(int rank, int k);

struct MarketMetrics {
  double hr = 0.0;
  double ndcg = 0.0;
  long n_users = 0;
};

struct RankingMetrics {
  std::map<MarketId, MarketMetrics> per_market;
  MarketMetrics overall;  // pooled over all test users
  std::vector<std::string> notes;
};

struct EvalOptions {
  int k_cutoff = 10;
  int n_negatives = 99;
  std::uint64_t seed = 0;
};

// Leave-one-out protocol: each test user's held-out item is ranked against
// n_negatives sampled unseen items. Negative draws depend only on (seed,
// user), so results are independent of evaluation order and thread count.
RankingMetrics evaluate(const SplitDataset& split, const Scorer& scorer, const EvalOptions& opt);

RankingMetrics evaluate_head(const HeadParameters& params, const PrototypeContext& ctx,
                             const SplitDataset& split, const EvalOptions& opt);

}  // namespace dgre
