#pragma once

#include <functional>
#include <span>
#include <vector>

namespace dgre {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moment accumulators, one slot per parameter in the flat vector.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  void reset(std::size_t n);
};

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamOptions& opt);

void sgd_step(std::span<double> params, std::span<const double> grads, double lr);

// Central finite differences against an analytic gradient. Returns the max
// relative error, |a - n| / max(|a|, |n|, 1e-8). x is restored on return.
double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<double> x, std::span<const double> analytic,
                         double h = 1e-5);

}  // namespace dgre
