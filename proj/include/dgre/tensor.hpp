#pragma once

#include <span>
#include <string>
#include <vector>

namespace dgre {

// Dense row-major matrix of 64-bit reals. All pipeline math runs in double.
struct Tensor2 {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor2() = default;
  Tensor2(int r, int c, double fill = 0.0);

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
  std::span<const double> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }

  bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
};

std::string shape_str(const Tensor2& t);

Tensor2 matmul(const Tensor2& a, const Tensor2& b);
Tensor2 hadamard(const Tensor2& a, const Tensor2& b);
// Vertical stack: a on top of b, equal column counts required.
Tensor2 concat_rows(const Tensor2& a, const Tensor2& b);
Tensor2 add_bias(const Tensor2& a, std::span<const double> bias);  // bias added to every row

std::vector<double> matvec(const Tensor2& w, std::span<const double> x);
// w^T * y, used by backward passes.
std::vector<double> matvec_transposed(const Tensor2& w, std::span<const double> y);

std::vector<double> hadamard(std::span<const double> a, std::span<const double> b);
std::vector<double> concat(std::span<const double> a, std::span<const double> b);
std::vector<double> add_bias(std::span<const double> x, std::span<const double> bias);
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);

double sigmoid(double x);
double relu(double x);
void sigmoid_inplace(std::span<double> x);
void relu_inplace(std::span<double> x);

// Probabilities are clamped into [1e-12, 1 - 1e-12] before they feed a log.
double clamp_prob(double p);
double bce_loss(double pred, double label);

}  // namespace dgre
