#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgre/data.hpp"
#include "dgre/market_prototypes.hpp"
#include "dgre/tensor.hpp"
#include "dgre/user_prototypes.hpp"

namespace dgre {

enum class Backbone { gmf, mlp, nmf };
enum class Variant { base, dgre, market_aware };

struct HeadKind {
  Backbone backbone = Backbone::gmf;
  Variant variant = Variant::base;

  bool operator==(const HeadKind&) const = default;
};

std::string to_string(Backbone b);
std::string to_string(Variant v);
Backbone backbone_from_string(const std::string& s);
Variant variant_from_string(const std::string& s);

// Frozen prototype lookups feeding the heads. A disabled side hands out the
// all-ones vector, which leaves the backbone untouched.
struct PrototypeContext {
  int dim = 0;
  bool user_side = false;
  bool market_side = false;
  std::unordered_map<UserId, std::vector<double>> user_proto;
  std::map<MarketId, std::vector<double>> market_proto;
  std::unordered_map<UserId, MarketId> user_market;
  std::vector<MarketId> markets;
  std::vector<double> ones;

  std::span<const double> b_for(UserId u) const;
  std::span<const double> o_for(const MarketId& m) const;
  const MarketId& market_of(UserId u) const;
  int market_index(const MarketId& m) const;
};

PrototypeContext make_prototype_context(const Dataset& train, const UserPrototypeSet& protos,
                                        const SoftAssignment& assignment,
                                        const MarketPrototypes& market_protos, int head_dim,
                                        bool user_side, bool market_side, bool soft_mixture);

// Context with both sides disabled; every lookup yields ones. Market tables
// are still populated so market-aware heads can build their one-hot part.
PrototypeContext plain_context(const Dataset& train, int head_dim);

// All trainable state of one head in a single flat vector, with named
// segment offsets. GMF holds an embedding pair and the output weights; MLP a
// pair plus the tower; NMF both branches.
struct HeadParameters {
  HeadKind kind;
  int dim = 0;
  std::vector<int> mlp_widths;
  int n_markets = 0;  // one-hot width, market_aware only
  std::vector<UserId> user_ids;
  std::unordered_map<UserId, int> user_index;
  std::vector<ItemId> item_ids;
  std::unordered_map<ItemId, int> item_index;
  std::vector<double> flat;

  std::size_t off_pg = 0, off_qg = 0, off_pm = 0, off_qm = 0, off_h = 0;
  std::vector<std::size_t> off_w, off_b;
  std::vector<std::pair<int, int>> w_shapes;  // rows x cols per tower layer
  int h_dim = 0;

  bool has_gmf_branch() const { return kind.backbone != Backbone::mlp; }
  bool has_mlp_branch() const { return kind.backbone != Backbone::gmf; }

  // Computes offsets and sizes flat; existing values are discarded.
  void build_layout();

  std::span<double> pg(int row);
  std::span<const double> pg(int row) const;
  std::span<double> qg(int row);
  std::span<const double> qg(int row) const;
  std::span<double> pm(int row);
  std::span<const double> pm(int row) const;
  std::span<double> qm(int row);
  std::span<const double> qm(int row) const;
  std::span<double> h();
  std::span<const double> h() const;

  int user_row(UserId u) const;
  int item_row(ItemId i) const;
};

// Eq-style forwards on raw vectors, shared by prediction and the oracle
// tests. All return the clamped sigmoid of the final inner product.
double gmf_forward(std::span<const double> p, std::span<const double> q,
                   std::span<const double> b, std::span<const double> o,
                   std::span<const double> h);
double mlp_forward(std::span<const double> p, std::span<const double> q,
                   std::span<const double> b, std::span<const double> o,
                   const std::vector<Tensor2>& ws, const std::vector<std::vector<double>>& bs,
                   std::span<const double> h);
double nmf_forward(std::span<const double> p_gmf, std::span<const double> q_gmf,
                   std::span<const double> p_mlp, std::span<const double> q_mlp,
                   std::span<const double> b, std::span<const double> o,
                   const std::vector<Tensor2>& ws, const std::vector<std::vector<double>>& bs,
                   std::span<const double> h);

double predict(const HeadParameters& params, const PrototypeContext& ctx, UserId user,
               ItemId item);

struct LabeledPair {
  UserId user = 0;
  ItemId item = 0;
  double label = 0.0;
};

// Mean BCE over the examples; when grad_out is non-empty it receives the
// dense gradient for params.flat (same length).
double head_loss_and_grad(const HeadParameters& params, const PrototypeContext& ctx,
                          std::span<const LabeledPair> examples, std::span<double> grad_out);

// Graph-embedding initialization for dgre heads; rows are truncated or
// zero-padded to the head width. Missing ids fall back to Gaussian noise.
struct HeadInit {
  std::unordered_map<UserId, std::vector<double>> user_vecs;
  std::unordered_map<ItemId, std::vector<double>> item_vecs;
};

struct PretrainedBranches {
  const HeadParameters* gmf = nullptr;
  const HeadParameters* mlp = nullptr;
};

struct HeadTrainOptions {
  int dim = 16;
  std::vector<int> mlp_widths{32, 16, 8};
  int epochs = 20;
  double lr = 1e-3;
  int neg_per_pos = 4;
  int batch_size = 256;
  std::uint64_t seed = 0;
};

struct HeadTrainResult {
  HeadParameters params;
  std::vector<double> epoch_loss;
};

// Pointwise BCE training with sampled negatives and Adam. Prototype vectors
// stay frozen. NMF requires both pretrained branches and fine-tunes them.
HeadTrainResult train_head(HeadKind kind, const SplitDataset& split, const PrototypeContext& ctx,
                           const HeadTrainOptions& opt, const HeadInit* init = nullptr,
                           const PretrainedBranches* pretrained = nullptr);

void save_head(const HeadParameters& params, const std::filesystem::path& path);
HeadParameters load_head(const std::filesystem::path& path);

// Truncates or pads a vector to length d.
std::vector<double> fit_dim(std::span<const double> src, int d, double pad);

}  // namespace dgre
