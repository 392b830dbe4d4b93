#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <vector>

#include "dgre/eval.hpp"
#include "doctest.h"

using namespace dgre;

namespace {

SplitDataset two_market_split(int users_per_market, int n_items) {
  std::vector<Interaction> rows;
  std::vector<TestInstance> test;
  for (int m = 0; m < 2; ++m) {
    MarketId mk{m == 0 ? "de" : "us"};
    for (int u = 0; u < users_per_market; ++u) {
      UserId uid = m * 1000 + u;
      for (ItemId i : {ItemId(3 * u % n_items), ItemId((3 * u + 1) % n_items),
                       ItemId((3 * u + 2) % n_items)})
        rows.push_back({uid, i, mk, i});
      test.push_back({uid, ItemId((3 * u + 7) % n_items), mk});
    }
  }
  SplitDataset split;
  split.train = make_dataset(std::move(rows));
  split.test = std::move(test);
  std::sort(split.test.begin(), split.test.end(),
            [](const TestInstance& a, const TestInstance& b) { return a.user < b.user; });
  return split;
}

}  // namespace

TEST_SUITE("ranking evaluation") {

TEST_CASE("equal scores push the held-out item down") {
  std::map<std::pair<UserId, ItemId>, double> table{
      {{1, 100}, 3.0}, {{1, 5}, 5.0}, {{1, 6}, 3.0}, {{1, 7}, 3.0}, {{1, 8}, 1.0}};
  Scorer scorer = [&](UserId u, ItemId i) { return table.at({u, i}); };
  std::vector<ItemId> negatives{5, 6, 7, 8};
  CHECK(rank_candidates(scorer, 1, 100, negatives) == 4);

  table[{1, 100}] = 9.0;
  CHECK(rank_candidates(scorer, 1, 100, negatives) == 1);

  table[{1, 100}] = 0.0;
  CHECK(rank_candidates(scorer, 1, 100, negatives) == 5);
}

TEST_CASE("the held-out item may not reappear among the negatives") {
  Scorer scorer = [](UserId, ItemId i) { return static_cast<double>(i); };
  std::vector<ItemId> negatives{5, 100, 7};
  CHECK_THROWS(rank_candidates(scorer, 1, 100, negatives));
}

TEST_CASE("hit rate and discounted gain at a cutoff") {
  CHECK(hr_at_k(1, 10) == 1.0);
  CHECK(hr_at_k(10, 10) == 1.0);
  CHECK(hr_at_k(11, 10) == 0.0);
  CHECK(ndcg_at_k(1, 10) == 1.0);
  CHECK(ndcg_at_k(3, 10) == 0.5);  // 1 / log2(4)
  CHECK(ndcg_at_k(11, 10) == 0.0);
  CHECK(ndcg_at_k(2, 10) == doctest::Approx(1.0 / std::log2(3.0)));
  CHECK_THROWS(hr_at_k(0, 10));
  CHECK_THROWS(ndcg_at_k(1, 0));
}

TEST_CASE("an oracle scorer tops every list and a hostile one bottoms it") {
  auto split = two_market_split(8, 40);
  std::unordered_map<UserId, ItemId> held;
  for (const auto& t : split.test) held[t.user] = t.item;

  EvalOptions opt;
  opt.k_cutoff = 10;
  opt.n_negatives = 15;
  opt.seed = 3;

  Scorer oracle = [&](UserId u, ItemId i) { return held.at(u) == i ? 1.0 : 0.0; };
  auto top = evaluate(split, oracle, opt);
  CHECK(top.overall.hr == 1.0);
  CHECK(top.overall.ndcg == 1.0);
  CHECK(top.overall.n_users == 16);
  for (const auto& [mk, mm] : top.per_market) {
    CHECK(mm.hr == 1.0);
    CHECK(mm.n_users == 8);
  }

  Scorer hostile = [&](UserId u, ItemId i) { return held.at(u) == i ? -1.0 : 1.0; };
  auto bottom = evaluate(split, hostile, opt);
  CHECK(bottom.overall.hr == 0.0);
  CHECK(bottom.overall.ndcg == 0.0);
}

TEST_CASE("overall metrics pool users across markets") {
  auto split = two_market_split(6, 40);
  std::unordered_map<UserId, ItemId> held;
  for (const auto& t : split.test) held[t.user] = t.item;

  // Perfect in one market, hopeless in the other.
  Scorer mixed = [&](UserId u, ItemId i) {
    bool hit = held.at(u) == i;
    if (u < 1000) return hit ? 1.0 : 0.0;
    return hit ? -1.0 : 1.0;
  };
  EvalOptions opt;
  opt.k_cutoff = 10;
  opt.n_negatives = 15;
  opt.seed = 5;
  auto metrics = evaluate(split, mixed, opt);
  CHECK(metrics.per_market.at(MarketId{"de"}).hr == 1.0);
  CHECK(metrics.per_market.at(MarketId{"us"}).hr == 0.0);
  CHECK(metrics.overall.hr == doctest::Approx(0.5));
  CHECK(metrics.overall.ndcg == doctest::Approx(0.5));
}

TEST_CASE("negative draws depend only on the seed and the user") {
  auto split = two_market_split(5, 40);
  Scorer scorer = [](UserId u, ItemId i) {
    return std::sin(static_cast<double>(u * 131 + i * 17));
  };
  EvalOptions opt;
  opt.n_negatives = 20;
  opt.seed = 11;
  auto a = evaluate(split, scorer, opt);
  auto b = evaluate(split, scorer, opt);
  CHECK(a.overall.hr == b.overall.hr);
  CHECK(a.overall.ndcg == b.overall.ndcg);

  // Reversing the walk order must not change anything either.
  std::reverse(split.test.begin(), split.test.end());
  auto c = evaluate(split, scorer, opt);
  CHECK(a.overall.hr == c.overall.hr);
  CHECK(a.overall.ndcg == c.overall.ndcg);
}

TEST_CASE("markets absent from the held-out set are noted") {
  auto split = two_market_split(4, 40);
  split.test.erase(std::remove_if(split.test.begin(), split.test.end(),
                                  [](const TestInstance& t) { return t.market.code == "us"; }),
                   split.test.end());
  Scorer scorer = [](UserId, ItemId i) { return static_cast<double>(i % 7); };
  EvalOptions opt;
  opt.n_negatives = 10;
  opt.seed = 2;
  auto metrics = evaluate(split, scorer, opt);
  CHECK(metrics.per_market.count(MarketId{"us"}) == 0);
  REQUIRE(metrics.notes.size() == 1);
  CHECK(metrics.notes[0].find("us") != std::string::npos);
}

}  // TEST_SUITE
