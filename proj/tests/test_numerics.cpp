#include <cmath>
#include <set>
#include <vector>

#include "dgre/optim.hpp"
#include "dgre/rng.hpp"
#include "dgre/tensor.hpp"
#include "doctest.h"

using namespace dgre;

namespace {

Tensor2 random_tensor(int r, int c, Rng& rng) {
  Tensor2 t(r, c);
  for (auto& v : t.data) v = rng.normal();
  return t;
}

Tensor2 naive_matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

TEST_SUITE("numerics") {

TEST_CASE("matrix product matches a direct triple loop") {
  Rng rng(7);
  for (auto [r, k, c] : {std::tuple{2, 3, 4}, {1, 5, 2}, {4, 4, 4}, {6, 1, 3}}) {
    auto a = random_tensor(r, k, rng);
    auto b = random_tensor(k, c, rng);
    auto got = matmul(a, b);
    auto want = naive_matmul(a, b);
    REQUIRE(got.same_shape(want));
    for (std::size_t i = 0; i < got.data.size(); ++i)
      CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(1e-12));
  }
}

TEST_CASE("matrix-vector products match direct loops") {
  Rng rng(11);
  auto w = random_tensor(3, 5, rng);
  std::vector<double> x(5), y(3);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();

  auto wx = matvec(w, x);
  REQUIRE(wx.size() == 3);
  for (int r = 0; r < 3; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 5; ++c) acc += w(r, c) * x[c];
    CHECK(wx[r] == doctest::Approx(acc).epsilon(1e-12));
  }

  auto wty = matvec_transposed(w, y);
  REQUIRE(wty.size() == 5);
  for (int c = 0; c < 5; ++c) {
    double acc = 0.0;
    for (int r = 0; r < 3; ++r) acc += w(r, c) * y[r];
    CHECK(wty[c] == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("elementwise helpers") {
  std::vector<double> a{1.0, -2.0, 3.0};
  std::vector<double> b{0.5, 4.0, -1.0};
  auto h = hadamard(std::span<const double>(a), std::span<const double>(b));
  CHECK(h == std::vector<double>{0.5, -8.0, -3.0});

  auto cat = concat(std::span<const double>(a), std::span<const double>(b));
  CHECK(cat == std::vector<double>{1.0, -2.0, 3.0, 0.5, 4.0, -1.0});

  auto shifted = add_bias(std::span<const double>(a), std::span<const double>(b));
  CHECK(shifted == std::vector<double>{1.5, 2.0, 2.0});

  CHECK(dot(a, b) == doctest::Approx(1.0 * 0.5 - 2.0 * 4.0 - 3.0));
  CHECK(l2_norm(a) == doctest::Approx(std::sqrt(14.0)));
  CHECK(squared_distance(a, b) == doctest::Approx(0.25 + 36.0 + 16.0));
}

TEST_CASE("sigmoid, relu and probability clamping") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(3.0) == doctest::Approx(1.0 - sigmoid(-3.0)).epsilon(1e-15));
  CHECK(relu(-2.0) == 0.0);
  CHECK(relu(2.5) == 2.5);
  CHECK(clamp_prob(0.0) == 1e-12);
  CHECK(clamp_prob(1.0) == 1.0 - 1e-12);
  CHECK(clamp_prob(0.3) == 0.3);
  CHECK(bce_loss(0.5, 1.0) == doctest::Approx(std::log(2.0)));
  CHECK(bce_loss(0.5, 0.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("random source is deterministic per seed") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    auto va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
    all_equal = all_equal && va == vb;
    any_diff = any_diff || va != vc;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform draws stay in range and integer draws cover the support") {
  Rng rng(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    seen.insert(rng.uniform_int(7));
  }
  CHECK(seen == std::set<std::uint64_t>{0, 1, 2, 3, 4, 5, 6});
}

TEST_CASE("shuffle permutes and sampling without replacement is distinct") {
  Rng rng(9);
  std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
  auto sorted = v;
  rng.shuffle(v);
  auto resorted = v;
  std::sort(resorted.begin(), resorted.end());
  CHECK(resorted == sorted);

  auto picks = rng.sample_without_replacement(20, 8);
  CHECK(picks.size() == 8);
  std::set<std::size_t> uniq(picks.begin(), picks.end());
  CHECK(uniq.size() == 8);
  for (auto p : picks) CHECK(p < 20);
}

TEST_CASE("gaussian draws have the requested moments") {
  Rng rng(31);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal(0.0, 1.0);
    sum += x;
    sum2 += x * x;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(std::sqrt(var) - 1.0) < 0.01);

  double shifted = rng.normal(3.0, 0.5);
  CHECK(std::isfinite(shifted));
}

TEST_CASE("seed mixing separates substreams") {
  CHECK(mix_seed(42, "alpha") != mix_seed(42, "beta"));
  CHECK(mix_seed(42, "alpha") == mix_seed(42, "alpha"));
  CHECK(mix_seed(42, "alpha") != mix_seed(43, "alpha"));
  CHECK(mix_seed(42, std::uint64_t{1}) != mix_seed(42, std::uint64_t{2}));
}

TEST_CASE("first adam step moves by roughly lr times the gradient sign") {
  std::vector<double> p{1.0, -2.0};
  std::vector<double> g{0.5, -0.25};
  AdamState state;
  AdamOptions opt;
  opt.lr = 0.1;
  adam_step(p, g, state, opt);
  CHECK(p[0] == doctest::Approx(1.0 - 0.1).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-2.0 + 0.1).epsilon(1e-6));
  CHECK(state.step == 1);
}

TEST_CASE("sgd step is exact") {
  std::vector<double> p{1.0, 2.0};
  std::vector<double> g{0.5, -1.0};
  sgd_step(p, g, 0.2);
  CHECK(p[0] == doctest::Approx(0.9));
  CHECK(p[1] == doctest::Approx(2.2));
}

TEST_CASE("finite differences accept a correct gradient and flag a wrong one") {
  auto f = [](std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
  };
  std::vector<double> x{0.3, -0.7, 1.2};
  std::vector<double> good{0.6, -1.4, 2.4};
  CHECK(finite_diff_check(f, x, good) < 1e-8);
  CHECK(x == std::vector<double>{0.3, -0.7, 1.2});

  std::vector<double> bad{0.65, -1.4, 2.4};
  CHECK(finite_diff_check(f, x, bad) > 1e-3);
}

}  // TEST_SUITE
