#include "dgre/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dgre {

namespace {

struct PairHash {
  std::size_t operator()(const std::pair<std::int64_t, std::int64_t>& p) const {
    std::size_t h = std::hash<std::int64_t>{}(p.first);
    return h ^ (std::hash<std::int64_t>{}(p.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};

bool parse_i64(const std::string& s, std::int64_t& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && ptr == e && !s.empty();
}

bool parse_f64(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size();
  } catch (...) {
    return false;
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line_no,
                             const std::string& what) {
  throw std::runtime_error("parse error in " + path.string() + " line " +
                           std::to_string(line_no) + ": " + what);
}

// Reads one TSV file. with_market selects the five-column canonical layout;
// otherwise the market comes from the caller and rows carry four columns at
// most (user, item, rating, optional timestamp).
void read_tsv_file(const std::filesystem::path& path, bool with_market,
                   const MarketId& fixed_market, std::vector<Interaction>& rows) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    const std::size_t user_col = with_market ? 1 : 0;
    const std::size_t min_cols = with_market ? 4 : 3;
    if (cols.size() < min_cols || cols.size() > min_cols + 1)
      parse_fail(path, line_no, "expected " + std::to_string(min_cols) + " or " +
                                    std::to_string(min_cols + 1) + " columns, got " +
                                    std::to_string(cols.size()));
    Interaction it;
    if (first_content_line && !parse_i64(cols[user_col], it.user)) {
      // Header row: the user field is not numeric.
      first_content_line = false;
      continue;
    }
    first_content_line = false;
    if (with_market) {
      if (!valid_market_code(cols[0]))
        parse_fail(path, line_no, "unknown market code '" + cols[0] + "'");
      it.market.code = cols[0];
    } else {
      it.market = fixed_market;
    }
    if (!parse_i64(cols[user_col], it.user)) parse_fail(path, line_no, "bad user id '" + cols[user_col] + "'");
    if (!parse_i64(cols[user_col + 1], it.item)) parse_fail(path, line_no, "bad item id '" + cols[user_col + 1] + "'");
    double rating = 0.0;
    if (!parse_f64(cols[user_col + 2], rating)) parse_fail(path, line_no, "bad rating '" + cols[user_col + 2] + "'");
    if (cols.size() == min_cols + 1) {
      if (!parse_i64(cols[user_col + 3], it.timestamp))
        parse_fail(path, line_no, "bad timestamp '" + cols[user_col + 3] + "'");
    }
    rows.push_back(std::move(it));
  }
}

// Collapses duplicate (user, item) pairs onto the earliest timestamp while
// keeping first-occurrence order.
std::vector<Interaction> dedup_rows(std::vector<Interaction> rows) {
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, std::size_t, PairHash> seen;
  std::vector<Interaction> out;
  out.reserve(rows.size());
  for (auto& r : rows) {
    auto key = std::make_pair(r.user, r.item);
    auto [it, inserted] = seen.emplace(key, out.size());
    if (inserted) {
      out.push_back(std::move(r));
    } else {
      Interaction& kept = out[it->second];
      if (kept.market != r.market)
        throw std::runtime_error("user " + std::to_string(r.user) +
                                 " appears in markets '" + kept.market.code + "' and '" +
                                 r.market.code + "'");
      if (r.timestamp < kept.timestamp) kept.timestamp = r.timestamp;
    }
  }
  return out;
}

}  // namespace

bool valid_market_code(const std::string& code) {
  if (code.empty()) return false;
  for (char c : code)
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))) return false;
  return true;
}

const MarketId& Dataset::market_of(UserId u) const {
  auto it = user_market_idx.find(u);
  if (it == user_market_idx.end())
    throw std::out_of_range("unknown user " + std::to_string(u));
  return markets[it->second];
}

std::span<const ItemId> Dataset::items_of(UserId u) const {
  auto it = user_items.find(u);
  if (it == user_items.end())
    throw std::out_of_range("unknown user " + std::to_string(u));
  return it->second;
}

Dataset make_dataset(std::vector<Interaction> rows) {
  Dataset ds;
  std::map<MarketId, int> market_idx;
  std::set<ItemId> item_set;
  std::unordered_map<std::pair<std::int64_t, std::int64_t>, bool, PairHash> pair_seen;
  for (const auto& r : rows) {
    if (!valid_market_code(r.market.code))
      throw std::runtime_error("unknown market code '" + r.market.code + "'");
    auto mit = market_idx.find(r.market);
    int midx;
    if (mit == market_idx.end()) {
      midx = static_cast<int>(ds.markets.size());
      market_idx.emplace(r.market, midx);
      ds.markets.push_back(r.market);
      ds.market_users[r.market] = {};
    } else {
      midx = mit->second;
    }
    auto uit = ds.user_market_idx.find(r.user);
    if (uit == ds.user_market_idx.end()) {
      ds.user_market_idx.emplace(r.user, midx);
    } else if (uit->second != midx) {
      throw std::invalid_argument("user " + std::to_string(r.user) + " appears in markets '" +
                                  ds.markets[uit->second].code + "' and '" + r.market.code + "'");
    }
    if (!pair_seen.emplace(std::make_pair(r.user, r.item), true).second)
      throw std::invalid_argument("duplicate interaction for user " + std::to_string(r.user) +
                                  " item " + std::to_string(r.item));
    item_set.insert(r.item);
    ds.user_items[r.user].push_back(r.item);
  }
  ds.items.assign(item_set.begin(), item_set.end());
  for (auto& [u, its] : ds.user_items) std::sort(its.begin(), its.end());
  for (auto& [u, midx] : ds.user_market_idx) ds.market_users[ds.markets[midx]].push_back(u);
  for (auto& [m, us] : ds.market_users) {
    std::sort(us.begin(), us.end());
    ds.users.insert(ds.users.end(), us.begin(), us.end());
  }
  std::sort(ds.users.begin(), ds.users.end());
  ds.interactions = std::move(rows);
  return ds;
}

Dataset load_interactions(const std::filesystem::path& path, FileFormat format) {
  std::vector<Interaction> rows;
  if (format == FileFormat::canonical_tsv) {
    read_tsv_file(path, true, MarketId{}, rows);
  } else {
    if (!std::filesystem::is_directory(path))
      throw std::runtime_error("not a directory: " + path.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".tsv")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::string code = f.stem().string();
      if (!valid_market_code(code))
        throw std::runtime_error("unknown market code '" + code + "' (from " + f.string() + ")");
      read_tsv_file(f, false, MarketId{code}, rows);
    }
  }
  return make_dataset(dedup_rows(std::move(rows)));
}

void write_interactions_tsv(const Dataset& ds, const std::filesystem::path& path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "market\tuser_id\titem_id\trating\ttimestamp\n";
  for (const auto& r : ds.interactions)
    out << r.market.code << '\t' << r.user << '\t' << r.item << "\t1\t" << r.timestamp << '\n';
}

Dataset filter_min_interactions(const Dataset& ds, int min_count) {
  std::vector<Interaction> rows = ds.interactions;
  for (;;) {
    std::unordered_map<UserId, int> user_deg;
    std::unordered_map<ItemId, int> item_deg;
    for (const auto& r : rows) {
      ++user_deg[r.user];
      ++item_deg[r.item];
    }
    auto low = [&](const Interaction& r) {
      return user_deg[r.user] < min_count || item_deg[r.item] < min_count;
    };
    auto new_end = std::remove_if(rows.begin(), rows.end(), low);
    if (new_end == rows.end()) break;
    rows.erase(new_end, rows.end());
  }
  return make_dataset(std::move(rows));
}

SplitDataset leave_one_out_split(const Dataset& ds, std::uint64_t) {
  // Latest timestamp wins; on a tie the larger item id is held out.
  std::unordered_map<UserId, std::size_t> held;
  std::unordered_map<UserId, int> counts;
  for (std::size_t i = 0; i < ds.interactions.size(); ++i) {
    const auto& r = ds.interactions[i];
    ++counts[r.user];
    auto it = held.find(r.user);
    if (it == held.end()) {
      held.emplace(r.user, i);
      continue;
    }
    const auto& cur = ds.interactions[it->second];
    if (r.timestamp > cur.timestamp ||
        (r.timestamp == cur.timestamp && r.item > cur.item))
      it->second = i;
  }
  for (const auto& [u, c] : counts)
    if (c < 2)
      throw std::runtime_error("leave_one_out_split: user " + std::to_string(u) +
                               " has a single interaction");
  std::vector<char> is_held(ds.interactions.size(), 0);
  for (const auto& [u, idx] : held) is_held[idx] = 1;
  std::vector<Interaction> train_rows;
  train_rows.reserve(ds.interactions.size() - held.size());
  for (std::size_t i = 0; i < ds.interactions.size(); ++i)
    if (!is_held[i]) train_rows.push_back(ds.interactions[i]);
  SplitDataset split;
  split.train = make_dataset(std::move(train_rows));
  split.test.reserve(held.size());
  for (UserId u : ds.users) {
    const auto& r = ds.interactions[held.at(u)];
    split.test.push_back({r.user, r.item, r.market});
  }
  return split;
}

std::vector<ItemId> sample_negatives_excluding(const Dataset& train, UserId user, int n,
                                               std::span<const ItemId> exclude, Rng& rng) {
  if (n < 0) throw std::invalid_argument("sample_negatives: n must be >= 0");
  auto owned = train.items_of(user);
  std::vector<ItemId> blocked(owned.begin(), owned.end());
  blocked.insert(blocked.end(), exclude.begin(), exclude.end());
  std::sort(blocked.begin(), blocked.end());
  blocked.erase(std::unique(blocked.begin(), blocked.end()), blocked.end());
  std::vector<ItemId> candidates;
  candidates.reserve(train.items.size());
  std::set_difference(train.items.begin(), train.items.end(), blocked.begin(), blocked.end(),
                      std::back_inserter(candidates));
  std::size_t want = std::min(candidates.size(), static_cast<std::size_t>(n));
  auto picks = rng.sample_without_replacement(candidates.size(), want);
  std::vector<ItemId> out;
  out.reserve(picks.size());
  for (std::size_t idx : picks) out.push_back(candidates[idx]);
  return out;
}

std::vector<ItemId> sample_negatives(const Dataset& train, UserId user, int n, Rng& rng) {
  return sample_negatives_excluding(train, user, n, {}, rng);
}

Dataset generate_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  if (cfg.n_markets < 1 || cfg.users_per_market < 1 || cfg.n_items < 1 || cfg.n_groups < 1)
    throw std::invalid_argument("generate_synthetic: counts must be positive");
  if (cfg.p_in < 0.0 || cfg.p_in > 1.0 || cfg.p_out < 0.0 || cfg.p_out > 1.0)
    throw std::invalid_argument("generate_synthetic: probabilities must lie in [0, 1]");
  if (!(cfg.p_in > cfg.p_out))
    throw std::invalid_argument("generate_synthetic: p_in must exceed p_out");
  if (cfg.items_per_group < 1 ||
      static_cast<std::int64_t>(cfg.n_groups) * cfg.items_per_group > cfg.n_items)
    throw std::invalid_argument("generate_synthetic: group blocks exceed item count");

  Rng rng(mix_seed(seed, "synth"));
  std::vector<Interaction> rows;
  for (int mk = 0; mk < cfg.n_markets; ++mk) {
    MarketId market{"m" + std::to_string(mk)};
    for (int u = 0; u < cfg.users_per_market; ++u) {
      UserId uid = static_cast<UserId>(mk) * cfg.users_per_market + u;
      // Group membership is shared across markets: it depends only on the
      // user's position inside its market.
      int group = u % cfg.n_groups;
      ItemId lo = static_cast<ItemId>(group) * cfg.items_per_group;
      ItemId hi = lo + cfg.items_per_group;
      for (ItemId item = 0; item < cfg.n_items; ++item) {
        double p = (item >= lo && item < hi) ? cfg.p_in : cfg.p_out;
        if (rng.uniform() < p) {
          std::int64_t ts = 1 + static_cast<std::int64_t>(rng.uniform_int(1000000));
          rows.push_back({uid, item, market, ts});
        }
      }
    }
  }
  return make_dataset(std::move(rows));
}

}  // namespace dgre
