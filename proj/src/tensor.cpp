#include "dgre/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace dgre {

namespace {
[[noreturn]] void shape_error(const std::string& op, const std::string& a, const std::string& b) {
  throw std::invalid_argument(op + ": shape mismatch " + a + " vs " + b);
}
std::string vshape(std::size_t n) { return "[" + std::to_string(n) + "]"; }
}  // namespace

Tensor2::Tensor2(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
  if (r < 0 || c < 0) throw std::invalid_argument("Tensor2: negative shape");
}

std::string shape_str(const Tensor2& t) {
  return "[" + std::to_string(t.rows) + "x" + std::to_string(t.cols) + "]";
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.rows) shape_error("matmul", shape_str(a), shape_str(b));
  Tensor2 out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

Tensor2 hadamard(const Tensor2& a, const Tensor2& b) {
  if (!a.same_shape(b)) shape_error("hadamard", shape_str(a), shape_str(b));
  Tensor2 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.data[i];
  return out;
}

Tensor2 concat_rows(const Tensor2& a, const Tensor2& b) {
  if (a.cols != b.cols) shape_error("concat_rows", shape_str(a), shape_str(b));
  Tensor2 out(a.rows + b.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
  return out;
}

Tensor2 add_bias(const Tensor2& a, std::span<const double> bias) {
  if (static_cast<std::size_t>(a.cols) != bias.size())
    shape_error("add_bias", shape_str(a), vshape(bias.size()));
  Tensor2 out = a;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out(i, j) += bias[j];
  return out;
}

std::vector<double> matvec(const Tensor2& w, std::span<const double> x) {
  if (static_cast<std::size_t>(w.cols) != x.size())
    shape_error("matvec", shape_str(w), vshape(x.size()));
  std::vector<double> out(w.rows, 0.0);
  for (int i = 0; i < w.rows; ++i) {
    double s = 0.0;
    auto row = w.row(i);
    for (int j = 0; j < w.cols; ++j) s += row[j] * x[j];
    out[i] = s;
  }
  return out;
}

std::vector<double> matvec_transposed(const Tensor2& w, std::span<const double> y) {
  if (static_cast<std::size_t>(w.rows) != y.size())
    shape_error("matvec_transposed", shape_str(w), vshape(y.size()));
  std::vector<double> out(w.cols, 0.0);
  for (int i = 0; i < w.rows; ++i) {
    double yi = y[i];
    if (yi == 0.0) continue;
    auto row = w.row(i);
    for (int j = 0; j < w.cols; ++j) out[j] += row[j] * yi;
  }
  return out;
}

std::vector<double> hadamard(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) shape_error("hadamard", vshape(a.size()), vshape(b.size()));
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

std::vector<double> concat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

std::vector<double> add_bias(std::span<const double> x, std::span<const double> bias) {
  if (x.size() != bias.size()) shape_error("add_bias", vshape(x.size()), vshape(bias.size()));
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + bias[i];
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) shape_error("dot", vshape(a.size()), vshape(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double l2_norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) shape_error("squared_distance", vshape(a.size()), vshape(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double relu(double x) { return x > 0.0 ? x : 0.0; }

void sigmoid_inplace(std::span<double> x) {
  for (double& v : x) v = sigmoid(v);
}
void relu_inplace(std::span<double> x) {
  for (double& v : x) v = relu(v);
}

double clamp_prob(double p) {
  constexpr double lo = 1e-12;
  constexpr double hi = 1.0 - 1e-12;
  if (p < lo) return lo;
  if (p > hi) return hi;
  return p;
}

double bce_loss(double pred, double label) {
  double p = clamp_prob(pred);
  return -(label * std::log(p) + (1.0 - label) * std::log(1.0 - p));
}

}  // namespace dgre
