#include "dgre/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dgre {

void AdamState::reset(std::size_t n) {
  m.assign(n, 0.0);
  v.assign(n, 0.0);
  step = 0;
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamOptions& opt) {
  if (params.size() != grads.size())
    throw std::invalid_argument("adam_step: params/grads size mismatch");
  if (state.m.size() != params.size()) state.reset(params.size());
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    double g = grads[i];
    state.m[i] = opt.beta1 * state.m[i] + (1.0 - opt.beta1) * g;
    state.v[i] = opt.beta2 * state.v[i] + (1.0 - opt.beta2) * g * g;
    double mhat = state.m[i] / bc1;
    double vhat = state.v[i] / bc2;
    params[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

void sgd_step(std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd_step: params/grads size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
}

double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<double> x, std::span<const double> analytic,
                         double h) {
  if (x.size() != analytic.size())
    throw std::invalid_argument("finite_diff_check: x/analytic size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double saved = x[i];
    x[i] = saved + h;
    double fp = f(x);
    x[i] = saved - h;
    double fm = f(x);
    x[i] = saved;
    double numeric = (fp - fm) / (2.0 * h);
    // The floor keeps roundoff in the difference quotient (about |f|*eps/h in
    // absolute terms) from dominating coordinates whose true gradient is
    // negligible on the loss scale.
    double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-6});
    worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace dgre
