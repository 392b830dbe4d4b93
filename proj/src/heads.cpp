#include "dgre/heads.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dgre/optim.hpp"
#include "dgre/rng.hpp"

namespace dgre {

std::string to_string(Backbone b) {
  switch (b) {
    case Backbone::gmf: return "gmf";
    case Backbone::mlp: return "mlp";
    case Backbone::nmf: return "nmf";
  }
  throw std::logic_error("unhandled backbone");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::base: return "base";
    case Variant::dgre: return "dgre";
    case Variant::market_aware: return "market_aware";
  }
  throw std::logic_error("unhandled variant");
}

Backbone backbone_from_string(const std::string& s) {
  if (s == "gmf") return Backbone::gmf;
  if (s == "mlp") return Backbone::mlp;
  if (s == "nmf") return Backbone::nmf;
  throw std::invalid_argument("unknown backbone '" + s + "', expected gmf, mlp or nmf");
}

Variant variant_from_string(const std::string& s) {
  if (s == "base") return Variant::base;
  if (s == "dgre") return Variant::dgre;
  if (s == "market_aware") return Variant::market_aware;
  throw std::invalid_argument("unknown variant '" + s + "', expected base, dgre or market_aware");
}

std::span<const double> PrototypeContext::b_for(UserId u) const {
  if (user_side) {
    auto it = user_proto.find(u);
    if (it != user_proto.end()) return it->second;
  }
  return ones;
}

std::span<const double> PrototypeContext::o_for(const MarketId& m) const {
  if (market_side) {
    auto it = market_proto.find(m);
    if (it != market_proto.end()) return it->second;
  }
  return ones;
}

const MarketId& PrototypeContext::market_of(UserId u) const {
  auto it = user_market.find(u);
  if (it == user_market.end())
    throw std::out_of_range("no market recorded for user " + std::to_string(u));
  return it->second;
}

int PrototypeContext::market_index(const MarketId& m) const {
  for (std::size_t i = 0; i < markets.size(); ++i)
    if (markets[i] == m) return static_cast<int>(i);
  throw std::out_of_range("market '" + m.code + "' not in context");
}

std::vector<double> fit_dim(std::span<const double> src, int d, double pad) {
  std::vector<double> out(static_cast<std::size_t>(d), pad);
  const std::size_t n = std::min(src.size(), static_cast<std::size_t>(d));
  std::copy(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(n), out.begin());
  return out;
}

namespace {

// Prototype vectors enter the score as elementwise multipliers, so they are
// standardized and re-centered around the neutral all-ones vector. Raw
// embedding-scale vectors would shrink every logit (starving the head of
// gradient), and zero-centered ones would zero out dimensions whenever the
// user-side and market-side multipliers are combined. Degenerate vectors
// fall back to the neutral multiplier.
// Per-user features modulate at half depth; market features, one vector
// shared by every user of the market, are kept shallower so a single noisy
// direction cannot distort the whole market's scores.
constexpr double kUserModulationDepth = 0.5;
constexpr double kMarketModulationDepth = 0.2;

std::vector<double> modulation_vector(std::vector<double> v, double depth) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double rms = std::sqrt(s / static_cast<double>(v.size()));
  if (rms < 1e-9) return std::vector<double>(v.size(), 1.0);
  double shifted = 0.0;
  for (double& x : v) {
    x = 1.0 + depth * (x / rms);
    shifted += x * x;
  }
  const double rms2 = std::sqrt(shifted / static_cast<double>(v.size()));
  for (double& x : v) x /= rms2;
  return v;
}

}  // namespace

PrototypeContext plain_context(const Dataset& train, int head_dim) {
  if (head_dim <= 0) throw std::invalid_argument("head dim must be positive");
  PrototypeContext ctx;
  ctx.dim = head_dim;
  ctx.ones.assign(static_cast<std::size_t>(head_dim), 1.0);
  ctx.markets = train.markets;
  for (UserId u : train.users) ctx.user_market.emplace(u, train.market_of(u));
  return ctx;
}

PrototypeContext make_prototype_context(const Dataset& train, const UserPrototypeSet& protos,
                                        const SoftAssignment& assignment,
                                        const MarketPrototypes& market_protos, int head_dim,
                                        bool user_side, bool market_side, bool soft_mixture) {
  PrototypeContext ctx = plain_context(train, head_dim);
  ctx.user_side = user_side;
  ctx.market_side = market_side;
  if (user_side) {
    if (protos.prototypes.empty()) throw std::invalid_argument("no user prototypes to attach");
    const int k = static_cast<int>(protos.prototypes.size());
    if (assignment.w.cols != k)
      throw std::invalid_argument("assignment has " + std::to_string(assignment.w.cols) +
                                  " columns for " + std::to_string(k) + " prototypes");
    const std::size_t d = protos.prototypes[0].size();
    for (int r = 0; r < assignment.w.rows; ++r) {
      std::vector<double> vec;
      if (soft_mixture) {
        vec.assign(d, 0.0);
        for (int c = 0; c < k; ++c) {
          const double w = assignment.w(r, c);
          const auto& proto = protos.prototypes[static_cast<std::size_t>(c)];
          for (std::size_t t = 0; t < d; ++t) vec[t] += w * proto[t];
        }
      } else {
        vec = protos.prototypes[static_cast<std::size_t>(assign_prototype(assignment.w, r))];
      }
      ctx.user_proto.emplace(assignment.row_ids[static_cast<std::size_t>(r)],
                             modulation_vector(fit_dim(vec, head_dim, 1.0), kUserModulationDepth));
    }
  }
  if (market_side) {
    for (const auto& [mk, proto] : market_protos.by_market)
      ctx.market_proto.emplace(mk, modulation_vector(fit_dim(proto.vec, head_dim, 1.0), kMarketModulationDepth));
  }
  return ctx;
}

void HeadParameters::build_layout() {
  if (dim <= 0) throw std::invalid_argument("head dim must be positive");
  if (has_mlp_branch() && mlp_widths.empty())
    throw std::invalid_argument("tower widths must be non-empty for mlp and nmf heads");
  for (int w : mlp_widths)
    if (w <= 0) throw std::invalid_argument("tower widths must be positive");
  if (kind.variant == Variant::market_aware && n_markets <= 0)
    throw std::invalid_argument("market-aware head needs at least one market");

  const std::size_t n = user_ids.size();
  const std::size_t m = item_ids.size();
  const std::size_t d = static_cast<std::size_t>(dim);
  const int t = kind.variant == Variant::market_aware ? n_markets : 0;

  std::size_t pos = 0;
  off_w.clear();
  off_b.clear();
  w_shapes.clear();
  if (has_gmf_branch()) {
    off_pg = pos;
    pos += n * d;
    off_qg = pos;
    pos += m * d;
  }
  if (has_mlp_branch()) {
    off_pm = pos;
    pos += n * d;
    off_qm = pos;
    pos += m * d;
    int in = 2 * dim + t;
    for (int w : mlp_widths) {
      off_w.push_back(pos);
      pos += static_cast<std::size_t>(w) * static_cast<std::size_t>(in);
      off_b.push_back(pos);
      pos += static_cast<std::size_t>(w);
      w_shapes.emplace_back(w, in);
      in = w;
    }
  }
  switch (kind.backbone) {
    case Backbone::gmf: h_dim = dim + t; break;
    case Backbone::mlp: h_dim = mlp_widths.back(); break;
    case Backbone::nmf: h_dim = dim + t + mlp_widths.back(); break;
  }
  off_h = pos;
  pos += static_cast<std::size_t>(h_dim);
  flat.assign(pos, 0.0);

  user_index.clear();
  for (std::size_t i = 0; i < user_ids.size(); ++i) user_index.emplace(user_ids[i], static_cast<int>(i));
  item_index.clear();
  for (std::size_t i = 0; i < item_ids.size(); ++i) item_index.emplace(item_ids[i], static_cast<int>(i));
}

namespace {

std::span<double> seg(std::vector<double>& flat, std::size_t off, std::size_t len) {
  return {flat.data() + off, len};
}

std::span<const double> seg(const std::vector<double>& flat, std::size_t off, std::size_t len) {
  return {flat.data() + off, len};
}

}  // namespace

std::span<double> HeadParameters::pg(int row) {
  return seg(flat, off_pg + static_cast<std::size_t>(row) * dim, static_cast<std::size_t>(dim));
}
std::span<const double> HeadParameters::pg(int row) const {
  return seg(flat, off_pg + static_cast<std::size_t>(row) * dim, static_cast<std::size_t>(dim));
}
std::span<double> HeadParameters::qg(int row) {
  return seg(flat, off_qg + static_cast<std::size_t>(row) * dim, static_cast<std::size_t>(dim));
}
std::span<const double> HeadParameters::qg(int row) const {
  return seg(flat, off_qg + static_cast<std::size_t>(row) * dim, static_cast<std::size_t>(dim));
}
std::span<double> HeadParameters::pm(int row) {
  return seg(flat, off_pm + static_cast<std::size_t>(row) * dim, static_cast<std::size_t>(dim));
}
std::span<const double> HeadParameters::pm(int row) const {
  return seg(flat, off_pm + static_cast<std::size_t>(row) * dim, static_cast<std::size_t>(dim));
}
std::span<double> HeadParameters::qm(int row) {
  return seg(flat, off_qm + static_cast<std::size_t>(row) * dim, static_cast<std::size_t>(dim));
}
std::span<const double> HeadParameters::qm(int row) const {
  return seg(flat, off_qm + static_cast<std::size_t>(row) * dim, static_cast<std::size_t>(dim));
}
std::span<double> HeadParameters::h() { return seg(flat, off_h, static_cast<std::size_t>(h_dim)); }
std::span<const double> HeadParameters::h() const {
  return seg(flat, off_h, static_cast<std::size_t>(h_dim));
}

int HeadParameters::user_row(UserId u) const {
  auto it = user_index.find(u);
  if (it == user_index.end()) throw std::out_of_range("unknown user " + std::to_string(u));
  return it->second;
}

int HeadParameters::item_row(ItemId i) const {
  auto it = item_index.find(i);
  if (it == item_index.end()) throw std::out_of_range("unknown item " + std::to_string(i));
  return it->second;
}

double gmf_forward(std::span<const double> p, std::span<const double> q,
                   std::span<const double> b, std::span<const double> o,
                   std::span<const double> h) {
  if (p.size() != q.size() || p.size() != b.size() || p.size() != o.size() ||
      p.size() != h.size())
    throw std::invalid_argument("gmf_forward: mismatched vector lengths");
  double z = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) z += h[k] * p[k] * b[k] * o[k] * q[k];
  return clamp_prob(sigmoid(z));
}

namespace {

// out = W x + bias with W given as a row-major block.
void affine(const double* w, const double* bias, int rows, int cols, const double* x,
            double* out) {
  for (int r = 0; r < rows; ++r) {
    double acc = bias[r];
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

std::vector<double> tower_pass(std::span<const double> m0, const std::vector<Tensor2>& ws,
                               const std::vector<std::vector<double>>& bs) {
  if (ws.size() != bs.size()) throw std::invalid_argument("tower weight and bias counts differ");
  std::vector<double> cur(m0.begin(), m0.end());
  for (std::size_t l = 0; l < ws.size(); ++l) {
    if (ws[l].cols != static_cast<int>(cur.size()))
      throw std::invalid_argument("tower layer " + std::to_string(l) + " expects " +
                                  std::to_string(ws[l].cols) + " inputs, got " +
                                  std::to_string(cur.size()));
    if (ws[l].rows != static_cast<int>(bs[l].size()))
      throw std::invalid_argument("tower layer " + std::to_string(l) + " bias length mismatch");
    std::vector<double> next(static_cast<std::size_t>(ws[l].rows));
    affine(ws[l].data.data(), bs[l].data(), ws[l].rows, ws[l].cols, cur.data(), next.data());
    relu_inplace(next);
    cur = std::move(next);
  }
  return cur;
}

std::vector<double> tower_input(std::span<const double> p, std::span<const double> q,
                                std::span<const double> b, std::span<const double> o) {
  if (p.size() != b.size() || q.size() != o.size() || p.size() != q.size())
    throw std::invalid_argument("tower input: mismatched vector lengths");
  std::vector<double> m0(2 * p.size());
  for (std::size_t k = 0; k < p.size(); ++k) m0[k] = p[k] * b[k];
  for (std::size_t k = 0; k < q.size(); ++k) m0[p.size() + k] = o[k] * q[k];
  return m0;
}

}  // namespace

double mlp_forward(std::span<const double> p, std::span<const double> q,
                   std::span<const double> b, std::span<const double> o,
                   const std::vector<Tensor2>& ws, const std::vector<std::vector<double>>& bs,
                   std::span<const double> h) {
  auto top = tower_pass(tower_input(p, q, b, o), ws, bs);
  if (top.size() != h.size())
    throw std::invalid_argument("mlp_forward: tower output and h length differ");
  return clamp_prob(sigmoid(dot(top, h)));
}

double nmf_forward(std::span<const double> p_gmf, std::span<const double> q_gmf,
                   std::span<const double> p_mlp, std::span<const double> q_mlp,
                   std::span<const double> b, std::span<const double> o,
                   const std::vector<Tensor2>& ws, const std::vector<std::vector<double>>& bs,
                   std::span<const double> h) {
  std::vector<double> gvec(p_gmf.size());
  for (std::size_t k = 0; k < gvec.size(); ++k) gvec[k] = p_gmf[k] * b[k] * o[k] * q_gmf[k];
  auto top = tower_pass(tower_input(p_mlp, q_mlp, b, o), ws, bs);
  auto f = concat(gvec, top);
  if (f.size() != h.size())
    throw std::invalid_argument("nmf_forward: fused vector and h length differ");
  return clamp_prob(sigmoid(dot(f, h)));
}

namespace {

struct Workspace {
  std::vector<double> f;
  std::vector<std::vector<double>> acts;  // acts[0] is the tower input
  std::vector<std::vector<double>> pre;
  std::vector<double> dcur, dprev;
};

// Pre-sigmoid score of one (user row, item row) pair; caches land in ws.
double forward_one(const HeadParameters& p, std::span<const double> b, std::span<const double> o,
                   int market_pos, int u_row, int i_row, Workspace& ws) {
  const int d = p.dim;
  const int t = p.kind.variant == Variant::market_aware ? p.n_markets : 0;
  ws.f.assign(static_cast<std::size_t>(p.h_dim), 0.0);
  std::size_t fpos = 0;
  if (p.has_gmf_branch()) {
    auto pu = p.pg(u_row);
    auto qi = p.qg(i_row);
    for (int k = 0; k < d; ++k) ws.f[static_cast<std::size_t>(k)] = pu[k] * b[k] * o[k] * qi[k];
    fpos = static_cast<std::size_t>(d);
    if (t > 0) {
      ws.f[fpos + static_cast<std::size_t>(market_pos)] = 1.0;
      fpos += static_cast<std::size_t>(t);
    }
  }
  if (p.has_mlp_branch()) {
    const std::size_t n_layers = p.mlp_widths.size();
    ws.acts.resize(n_layers + 1);
    ws.pre.resize(n_layers);
    auto& m0 = ws.acts[0];
    m0.assign(static_cast<std::size_t>(2 * d + t), 0.0);
    auto pu = p.pm(u_row);
    auto qi = p.qm(i_row);
    for (int k = 0; k < d; ++k) m0[static_cast<std::size_t>(k)] = pu[k] * b[k];
    for (int k = 0; k < d; ++k) m0[static_cast<std::size_t>(d + k)] = o[k] * qi[k];
    if (t > 0) m0[static_cast<std::size_t>(2 * d + market_pos)] = 1.0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto [rows, cols] = p.w_shapes[l];
      ws.pre[l].resize(static_cast<std::size_t>(rows));
      affine(p.flat.data() + p.off_w[l], p.flat.data() + p.off_b[l], rows, cols,
             ws.acts[l].data(), ws.pre[l].data());
      ws.acts[l + 1] = ws.pre[l];
      relu_inplace(ws.acts[l + 1]);
    }
    const auto& top = ws.acts[n_layers];
    std::copy(top.begin(), top.end(), ws.f.begin() + static_cast<std::ptrdiff_t>(fpos));
  }
  return dot(ws.f, p.h());
}

// Adds delta * d(logit)/d(params) into grad, reusing the forward caches.
void backward_one(const HeadParameters& p, std::span<const double> b, std::span<const double> o,
                  int u_row, int i_row, double delta, const Workspace& ws,
                  std::span<double> grad) {
  const int d = p.dim;
  const int t = p.kind.variant == Variant::market_aware ? p.n_markets : 0;
  auto h = p.h();
  for (int k = 0; k < p.h_dim; ++k)
    grad[p.off_h + static_cast<std::size_t>(k)] += delta * ws.f[static_cast<std::size_t>(k)];
  std::size_t fpos = 0;
  if (p.has_gmf_branch()) {
    auto pu = p.pg(u_row);
    auto qi = p.qg(i_row);
    for (int k = 0; k < d; ++k) {
      const double dg = delta * h[static_cast<std::size_t>(k)];
      grad[p.off_pg + static_cast<std::size_t>(u_row) * d + k] += dg * b[k] * o[k] * qi[k];
      grad[p.off_qg + static_cast<std::size_t>(i_row) * d + k] += dg * pu[k] * b[k] * o[k];
    }
    fpos = static_cast<std::size_t>(d + t);
  }
  if (p.has_mlp_branch()) {
    const std::size_t n_layers = p.mlp_widths.size();
    std::vector<double> dcur(h.begin() + static_cast<std::ptrdiff_t>(fpos), h.end());
    for (auto& v : dcur) v *= delta;
    for (std::size_t l = n_layers; l-- > 0;) {
      const auto [rows, cols] = p.w_shapes[l];
      for (int r = 0; r < rows; ++r)
        if (ws.pre[l][static_cast<std::size_t>(r)] <= 0.0) dcur[static_cast<std::size_t>(r)] = 0.0;
      const auto& below = ws.acts[l];
      for (int r = 0; r < rows; ++r) {
        const double dr = dcur[static_cast<std::size_t>(r)];
        if (dr == 0.0) continue;
        double* wrow = grad.data() + p.off_w[l] + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) wrow[c] += dr * below[static_cast<std::size_t>(c)];
        grad[p.off_b[l] + static_cast<std::size_t>(r)] += dr;
      }
      std::vector<double> dbelow(static_cast<std::size_t>(cols), 0.0);
      const double* w = p.flat.data() + p.off_w[l];
      for (int r = 0; r < rows; ++r) {
        const double dr = dcur[static_cast<std::size_t>(r)];
        if (dr == 0.0) continue;
        const double* wrow = w + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) dbelow[static_cast<std::size_t>(c)] += dr * wrow[c];
      }
      dcur = std::move(dbelow);
    }
    for (int k = 0; k < d; ++k) {
      grad[p.off_pm + static_cast<std::size_t>(u_row) * d + k] +=
          dcur[static_cast<std::size_t>(k)] * b[k];
      grad[p.off_qm + static_cast<std::size_t>(i_row) * d + k] +=
          dcur[static_cast<std::size_t>(d + k)] * o[k];
    }
  }
}

struct ExampleView {
  std::span<const double> b;
  std::span<const double> o;
  int market_pos = -1;
};

ExampleView resolve_context(const HeadParameters& p, const PrototypeContext& ctx, UserId user) {
  if (ctx.dim != p.dim)
    throw std::invalid_argument("context dim " + std::to_string(ctx.dim) +
                                " does not match head dim " + std::to_string(p.dim));
  ExampleView v;
  v.b = ctx.b_for(user);
  const bool needs_market = ctx.market_side || p.kind.variant == Variant::market_aware;
  if (needs_market) {
    const MarketId& mk = ctx.market_of(user);
    v.o = ctx.o_for(mk);
    if (p.kind.variant == Variant::market_aware) v.market_pos = ctx.market_index(mk);
  } else {
    v.o = std::span<const double>(ctx.ones);
  }
  return v;
}

}  // namespace

double predict(const HeadParameters& params, const PrototypeContext& ctx, UserId user,
               ItemId item) {
  Workspace ws;
  const auto view = resolve_context(params, ctx, user);
  const double z = forward_one(params, view.b, view.o, view.market_pos, params.user_row(user),
                               params.item_row(item), ws);
  return clamp_prob(sigmoid(z));
}

double head_loss_and_grad(const HeadParameters& params, const PrototypeContext& ctx,
                          std::span<const LabeledPair> examples, std::span<double> grad_out) {
  if (examples.empty()) throw std::invalid_argument("no examples to score");
  if (!grad_out.empty() && grad_out.size() != params.flat.size())
    throw std::invalid_argument("gradient buffer has " + std::to_string(grad_out.size()) +
                                " slots for " + std::to_string(params.flat.size()) +
                                " parameters");
  if (!grad_out.empty()) std::fill(grad_out.begin(), grad_out.end(), 0.0);
  Workspace ws;
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  for (const auto& ex : examples) {
    const auto view = resolve_context(params, ctx, ex.user);
    const int u_row = params.user_row(ex.user);
    const int i_row = params.item_row(ex.item);
    const double z = forward_one(params, view.b, view.o, view.market_pos, u_row, i_row, ws);
    const double pred = clamp_prob(sigmoid(z));
    total += bce_loss(pred, ex.label);
    if (!grad_out.empty()) {
      const double delta = (sigmoid(z) - ex.label) * inv_n;
      backward_one(params, view.b, view.o, u_row, i_row, delta, ws, grad_out);
    }
  }
  return total * inv_n;
}

namespace {

void gaussian_fill(std::span<double> dst, Rng& rng, double stddev) {
  for (auto& v : dst) v = rng.normal(0.0, stddev);
}

void glorot_fill(std::span<double> dst, int fan_in, int fan_out, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : dst) v = rng.normal(0.0, stddev);
}

void init_embedding_rows(HeadParameters& p, bool gmf_side, const HeadInit* init, Rng& rng) {
  const double stddev = 0.1;
  for (std::size_t r = 0; r < p.user_ids.size(); ++r) {
    auto dst = gmf_side ? p.pg(static_cast<int>(r)) : p.pm(static_cast<int>(r));
    const auto* vec = init ? [&]() -> const std::vector<double>* {
      auto it = init->user_vecs.find(p.user_ids[r]);
      return it == init->user_vecs.end() ? nullptr : &it->second;
    }() : nullptr;
    if (vec) {
      auto fitted = fit_dim(*vec, p.dim, 0.0);
      std::copy(fitted.begin(), fitted.end(), dst.begin());
    } else {
      gaussian_fill(dst, rng, stddev);
    }
  }
  for (std::size_t r = 0; r < p.item_ids.size(); ++r) {
    auto dst = gmf_side ? p.qg(static_cast<int>(r)) : p.qm(static_cast<int>(r));
    const auto* vec = init ? [&]() -> const std::vector<double>* {
      auto it = init->item_vecs.find(p.item_ids[r]);
      return it == init->item_vecs.end() ? nullptr : &it->second;
    }() : nullptr;
    if (vec) {
      auto fitted = fit_dim(*vec, p.dim, 0.0);
      std::copy(fitted.begin(), fitted.end(), dst.begin());
    } else {
      gaussian_fill(dst, rng, stddev);
    }
  }
}

void check_branch(const HeadParameters& branch, Backbone expected, const HeadParameters& host) {
  if (branch.kind.backbone != expected)
    throw std::invalid_argument("pretrained branch is " + to_string(branch.kind.backbone) +
                                ", expected " + to_string(expected));
  if (branch.kind.variant != host.kind.variant)
    throw std::invalid_argument("pretrained " + to_string(expected) +
                                " branch variant differs from the fused head");
  if (branch.dim != host.dim)
    throw std::invalid_argument("pretrained " + to_string(expected) + " branch dim " +
                                std::to_string(branch.dim) + " differs from head dim " +
                                std::to_string(host.dim));
  if (branch.user_ids != host.user_ids || branch.item_ids != host.item_ids)
    throw std::invalid_argument("pretrained " + to_string(expected) +
                                " branch covers a different id set");
  if (expected == Backbone::mlp && branch.mlp_widths != host.mlp_widths)
    throw std::invalid_argument("pretrained mlp branch tower widths differ");
  if (branch.n_markets != host.n_markets)
    throw std::invalid_argument("pretrained " + to_string(expected) +
                                " branch market count differs");
}

}  // namespace

HeadTrainResult train_head(HeadKind kind, const SplitDataset& split, const PrototypeContext& ctx,
                           const HeadTrainOptions& opt, const HeadInit* init,
                           const PretrainedBranches* pretrained) {
  if (opt.dim <= 0) throw std::invalid_argument("head dim must be positive");
  if (opt.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (opt.lr <= 0.0) throw std::invalid_argument("learning rate must be positive");
  if (opt.neg_per_pos < 0) throw std::invalid_argument("negatives per positive must be >= 0");
  if (opt.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (split.train.interactions.empty()) throw std::invalid_argument("empty training split");

  HeadTrainResult out;
  HeadParameters& params = out.params;
  params.kind = kind;
  params.dim = opt.dim;
  if (kind.backbone != Backbone::gmf) params.mlp_widths = opt.mlp_widths;
  params.n_markets =
      kind.variant == Variant::market_aware ? static_cast<int>(ctx.markets.size()) : 0;
  params.user_ids = split.train.users;
  params.item_ids = split.train.items;
  for (const auto& t : split.test) params.item_ids.push_back(t.item);
  std::sort(params.item_ids.begin(), params.item_ids.end());
  params.item_ids.erase(std::unique(params.item_ids.begin(), params.item_ids.end()),
                        params.item_ids.end());
  params.build_layout();

  Rng rng(mix_seed(opt.seed, "head-train"));
  if (kind.backbone == Backbone::nmf) {
    if (pretrained == nullptr || pretrained->gmf == nullptr || pretrained->mlp == nullptr)
      throw std::invalid_argument("fused head needs pretrained gmf and mlp branches");
    check_branch(*pretrained->gmf, Backbone::gmf, params);
    check_branch(*pretrained->mlp, Backbone::mlp, params);
    const auto& g = *pretrained->gmf;
    const auto& m = *pretrained->mlp;
    std::copy_n(g.flat.data() + g.off_pg, params.user_ids.size() * opt.dim,
                params.flat.data() + params.off_pg);
    std::copy_n(g.flat.data() + g.off_qg, params.item_ids.size() * opt.dim,
                params.flat.data() + params.off_qg);
    std::copy_n(m.flat.data() + m.off_pm, params.user_ids.size() * opt.dim,
                params.flat.data() + params.off_pm);
    std::copy_n(m.flat.data() + m.off_qm, params.item_ids.size() * opt.dim,
                params.flat.data() + params.off_qm);
    for (std::size_t l = 0; l < params.off_w.size(); ++l) {
      const auto [rows, cols] = params.w_shapes[l];
      std::copy_n(m.flat.data() + m.off_w[l],
                  static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols),
                  params.flat.data() + params.off_w[l]);
      std::copy_n(m.flat.data() + m.off_b[l], static_cast<std::size_t>(rows),
                  params.flat.data() + params.off_b[l]);
    }
    auto h = params.h();
    auto hg = g.h();
    auto hm = m.h();
    for (std::size_t k = 0; k < hg.size(); ++k) h[k] = 0.5 * hg[k];
    for (std::size_t k = 0; k < hm.size(); ++k) h[hg.size() + k] = 0.5 * hm[k];
  } else {
    const HeadInit* use_init = kind.variant == Variant::base ? nullptr : init;
    init_embedding_rows(params, kind.backbone == Backbone::gmf, use_init, rng);
    if (params.has_mlp_branch()) {
      for (std::size_t l = 0; l < params.off_w.size(); ++l) {
        const auto [rows, cols] = params.w_shapes[l];
        glorot_fill(seg(params.flat, params.off_w[l],
                        static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)),
                    cols, rows, rng);
      }
    }
    gaussian_fill(params.h(), rng, 0.1);
  }

  AdamState adam;
  adam.reset(params.flat.size());
  AdamOptions adam_opt;
  adam_opt.lr = opt.lr;
  std::vector<double> grad(params.flat.size(), 0.0);

  std::vector<std::size_t> order(split.train.interactions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<LabeledPair> batch;
  batch.reserve(static_cast<std::size_t>(opt.batch_size) *
                static_cast<std::size_t>(1 + opt.neg_per_pos));
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_total = 0.0;
    std::size_t epoch_examples = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      batch.clear();
      for (std::size_t idx = start; idx < stop; ++idx) {
        const auto& row = split.train.interactions[order[idx]];
        batch.push_back({row.user, row.item, 1.0});
        for (ItemId neg : sample_negatives(split.train, row.user, opt.neg_per_pos, rng))
          batch.push_back({row.user, neg, 0.0});
      }
      const double loss = head_loss_and_grad(params, ctx, batch, grad);
      adam_step(params.flat, grad, adam, adam_opt);
      epoch_total += loss * static_cast<double>(batch.size());
      epoch_examples += batch.size();
    }
    out.epoch_loss.push_back(epoch_total / static_cast<double>(epoch_examples));
  }
  return out;
}

void save_head(const HeadParameters& params, const std::filesystem::path& path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  nlohmann::json header;
  header["backbone"] = to_string(params.kind.backbone);
  header["variant"] = to_string(params.kind.variant);
  header["dim"] = params.dim;
  header["mlp_widths"] = params.mlp_widths;
  header["n_markets"] = params.n_markets;
  header["n_users"] = params.user_ids.size();
  header["n_items"] = params.item_ids.size();
  out << "DGRE1\n" << header.dump() << "\n";
  for (std::size_t i = 0; i < params.user_ids.size(); ++i)
    out << params.user_ids[i] << (i + 1 == params.user_ids.size() ? "\n" : " ");
  if (params.user_ids.empty()) out << "\n";
  for (std::size_t i = 0; i < params.item_ids.size(); ++i)
    out << params.item_ids[i] << (i + 1 == params.item_ids.size() ? "\n" : " ");
  if (params.item_ids.empty()) out << "\n";
  out << params.flat.size() << "\n";
  char buf[64];
  for (std::size_t i = 0; i < params.flat.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", params.flat[i]);
    out << buf << ((i + 1) % 8 == 0 || i + 1 == params.flat.size() ? "\n" : " ");
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

HeadParameters load_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != "DGRE1")
    throw std::runtime_error(path.string() + " is not a model checkpoint (bad magic)");
  std::string header_line;
  std::getline(in, header_line);
  nlohmann::json header = nlohmann::json::parse(header_line);

  HeadParameters params;
  params.kind.backbone = backbone_from_string(header.at("backbone").get<std::string>());
  params.kind.variant = variant_from_string(header.at("variant").get<std::string>());
  params.dim = header.at("dim").get<int>();
  params.mlp_widths = header.at("mlp_widths").get<std::vector<int>>();
  params.n_markets = header.at("n_markets").get<int>();
  const auto n_users = header.at("n_users").get<std::size_t>();
  const auto n_items = header.at("n_items").get<std::size_t>();

  std::string line;
  std::getline(in, line);
  {
    std::istringstream is(line);
    UserId u;
    while (is >> u) params.user_ids.push_back(u);
  }
  std::getline(in, line);
  {
    std::istringstream is(line);
    ItemId i;
    while (is >> i) params.item_ids.push_back(i);
  }
  if (params.user_ids.size() != n_users || params.item_ids.size() != n_items)
    throw std::runtime_error(path.string() + ": id row lengths disagree with the header");

  std::size_t count = 0;
  in >> count;
  params.build_layout();
  if (count != params.flat.size())
    throw std::runtime_error(path.string() + ": checkpoint has " + std::to_string(count) +
                             " parameters, layout expects " + std::to_string(params.flat.size()));
  for (std::size_t i = 0; i < count; ++i)
    if (!(in >> params.flat[i]))
      throw std::runtime_error(path.string() + ": truncated at parameter " + std::to_string(i));
  return params;
}

}  // namespace dgre
