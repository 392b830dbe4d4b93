#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgre/rng.hpp"

namespace dgre {

using UserId = std::int64_t;
using ItemId = std::int64_t;

// Short lowercase market code, e.g. "de" or "jp".
struct MarketId {
  std::string code;
  auto operator<=>(const MarketId&) const = default;
};

bool valid_market_code(const std::string& code);

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  MarketId market;
  std::int64_t timestamp = 0;

  bool operator==(const Interaction&) const = default;
};

// Immutable view of one interaction log. Users belong to exactly one market,
// items form a single vocabulary shared across markets. Build instances via
// make_dataset so the derived indexes stay consistent.
struct Dataset {
  std::vector<MarketId> markets;                       // first-appearance order
  std::map<MarketId, std::vector<UserId>> market_users;  // sorted ids
  std::vector<ItemId> items;                           // sorted unique
  std::vector<Interaction> interactions;

  std::unordered_map<UserId, int> user_market_idx;
  std::unordered_map<UserId, std::vector<ItemId>> user_items;  // sorted
  std::vector<UserId> users;                           // sorted across markets

  const MarketId& market_of(UserId u) const;
  std::span<const ItemId> items_of(UserId u) const;
  bool has_user(UserId u) const { return user_market_idx.count(u) > 0; }

  bool operator==(const Dataset& o) const {
    return markets == o.markets && interactions == o.interactions;
  }
};

// Validates per-user market uniqueness and (user, item) uniqueness, then
// builds the derived indexes. Rows keep their given order.
Dataset make_dataset(std::vector<Interaction> rows);

struct TestInstance {
  UserId user = 0;
  ItemId item = 0;
  MarketId market;

  bool operator==(const TestInstance&) const = default;
};

struct SplitDataset {
  Dataset train;
  std::vector<TestInstance> test;  // ascending user id
};

enum class FileFormat {
  canonical_tsv,   // market <tab> user <tab> item <tab> rating [<tab> timestamp]
  per_market_dir,  // directory of <market>.tsv files without the market column
};

// Parses interaction logs. A leading header row is skipped when its user
// field is not numeric. Duplicate (user, item) rows collapse to the earliest
// timestamp. Ratings are treated as implicit feedback and binarized.
Dataset load_interactions(const std::filesystem::path& path, FileFormat format);

void write_interactions_tsv(const Dataset& ds, const std::filesystem::path& path);

// Drops users and items with fewer than min_count interactions, repeating
// until no further row falls below the threshold.
Dataset filter_min_interactions(const Dataset& ds, int min_count);

// Holds out each user's latest interaction (ties broken toward the larger
// item id). The rule is deterministic; seed is accepted for interface
// stability and currently unused.
SplitDataset leave_one_out_split(const Dataset& ds, std::uint64_t seed = 0);

// n distinct items the user has not interacted with in train, uniform without
// replacement.
std::vector<ItemId> sample_negatives(const Dataset& train, UserId user, int n, Rng& rng);
std::vector<ItemId> sample_negatives_excluding(const Dataset& train, UserId user, int n,
                                               std::span<const ItemId> exclude, Rng& rng);

struct SynthConfig {
  int n_markets = 3;
  int users_per_market = 200;
  int n_items = 300;
  int n_groups = 4;
  int items_per_group = 75;
  double p_in = 0.3;
  double p_out = 0.02;
};

// Planted-structure generator: every user carries a latent behavior group
// (shared across markets) and interacts with that group's item block with
// probability p_in, with everything else at p_out.
Dataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace dgre
