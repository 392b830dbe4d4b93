#include "dgre/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dgre/parallel.hpp"
#include "dgre/rng.hpp"

namespace dgre {

int rank_candidates(const Scorer& scorer, UserId user, ItemId held_out,
                    std::span<const ItemId> negatives) {
  std::vector<ItemId> seen(negatives.begin(), negatives.end());
  seen.push_back(held_out);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    throw std::invalid_argument("candidate list for user " + std::to_string(user) +
                                " contains duplicates");
  const double held_score = scorer(user, held_out);
  int rank = 1;
  for (ItemId neg : negatives)
    if (scorer(user, neg) >= held_score) ++rank;
  return rank;
}

double hr_at_k(int rank, int k) {
  if (rank < 1 || k < 1) throw std::invalid_argument("rank and cutoff must be >= 1");
  return rank <= k ? 1.0 : 0.0;
}

double ndcg_at_k(int rank, int k) {
  if (rank < 1 || k < 1) throw std::invalid_argument("rank and cutoff must be >= 1");
  return rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

RankingMetrics evaluate(const SplitDataset& split, const Scorer& scorer, const EvalOptions& opt) {
  if (split.test.empty()) throw std::invalid_argument("no test instances to evaluate");
  if (opt.k_cutoff < 1) throw std::invalid_argument("cutoff must be >= 1");
  if (opt.n_negatives < 1) throw std::invalid_argument("negative count must be >= 1");

  std::vector<int> ranks(split.test.size(), 0);
  parallel_for(static_cast<int>(split.test.size()), [&](int i) {
    const auto& inst = split.test[static_cast<std::size_t>(i)];
    Rng rng(mix_seed(opt.seed, static_cast<std::uint64_t>(inst.user)));
    const ItemId held[] = {inst.item};
    const auto negatives =
        sample_negatives_excluding(split.train, inst.user, opt.n_negatives, held, rng);
    ranks[static_cast<std::size_t>(i)] = rank_candidates(scorer, inst.user, inst.item, negatives);
  });

  RankingMetrics out;
  for (std::size_t i = 0; i < split.test.size(); ++i) {
    const auto& inst = split.test[i];
    auto& mm = out.per_market[inst.market];
    const double hr = hr_at_k(ranks[i], opt.k_cutoff);
    const double nd = ndcg_at_k(ranks[i], opt.k_cutoff);
    mm.hr += hr;
    mm.ndcg += nd;
    mm.n_users += 1;
    out.overall.hr += hr;
    out.overall.ndcg += nd;
    out.overall.n_users += 1;
  }
  for (auto& [mk, mm] : out.per_market) {
    mm.hr /= static_cast<double>(mm.n_users);
    mm.ndcg /= static_cast<double>(mm.n_users);
  }
  out.overall.hr /= static_cast<double>(out.overall.n_users);
  out.overall.ndcg /= static_cast<double>(out.overall.n_users);
  for (const auto& mk : split.train.markets)
    if (out.per_market.find(mk) == out.per_market.end())
      out.notes.push_back("market " + mk.code + " has no test users");
  return out;
}

RankingMetrics evaluate_head(const HeadParameters& params, const PrototypeContext& ctx,
                             const SplitDataset& split, const EvalOptions& opt) {
  return evaluate(
      split, [&](UserId u, ItemId i) { return predict(params, ctx, u, i); }, opt);
}

}  // namespace dgre
