#include <cmath>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "xsib/core/errors.hpp"
#include "xsib/nn/ops.hpp"
#include "xsib/nn/optim.hpp"
#include "xsib/nn/params.hpp"

using namespace xsib;
using namespace xsib::nn;
using xsib::testing::all_coords;
using xsib::testing::grad_check;

namespace {

Tensor rand_tensor(std::mt19937_64& rng, Shape s, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(numel(s));
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(s), std::move(v), true);
}

// Weighted sum so every output element gets a distinct upstream gradient.
Tensor probe(const Tensor& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> w(y.size());
  for (auto& x : w) x = u(rng);
  return sum(y * Tensor(y.shape(), w));
}

void check_op(const std::function<Tensor(const std::vector<Tensor>&)>& op, std::vector<Tensor> inputs) {
  auto loss = [&] { return probe(op(inputs), 99); };
  const auto r = grad_check(loss, inputs, all_coords(inputs), 1e-5, 1e-7);
  CHECK(r.worst_relative < 1e-5);
}

}  // namespace

TEST_CASE("ops: forward values") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2}, {10, 20});
  const auto s = a + b;
  CHECK(std::vector<double>(s.values().begin(), s.values().end()) == std::vector<double>{11, 22, 13, 24});
  Tensor w({2, 1}, {1, -1});
  const auto m = matmul(a, w);
  CHECK(std::vector<double>(m.values().begin(), m.values().end()) == std::vector<double>{-1, -1});
  CHECK(mean(a).item() == 2.5);
  const auto p = permute(Tensor({2, 3}, {0, 1, 2, 3, 4, 5}), {1, 0});
  CHECK(std::vector<double>(p.values().begin(), p.values().end()) == std::vector<double>{0, 3, 1, 4, 2, 5});
  const auto c = concat({Tensor({1, 2}, {1, 2}), Tensor({1, 1}, {3})}, 1);
  CHECK(std::vector<double>(c.values().begin(), c.values().end()) == std::vector<double>{1, 2, 3});
  CHECK(softplus(Tensor::scalar(800.0)).item() == doctest::Approx(800.0));
  CHECK(softplus(Tensor::scalar(-800.0)).item() >= 0.0);
  CHECK_THROWS_AS(a + Tensor({3}, {1, 2, 3}), ShapeError);
}

TEST_CASE("ops: conv1d with same padding against a direct loop") {
  std::mt19937_64 rng(1);
  auto x = rand_tensor(rng, {2, 3, 7});
  auto w = rand_tensor(rng, {4, 3, 3});
  auto b = rand_tensor(rng, {4});
  const auto y = conv1d(x, w, b);
  REQUIRE(y.shape() == Shape{2, 4, 7});
  for (int n = 0; n < 2; ++n)
    for (int o = 0; o < 4; ++o)
      for (int l = 0; l < 7; ++l) {
        double s = b.values()[o];
        for (int i = 0; i < 3; ++i)
          for (int k = 0; k < 3; ++k) {
            const int li = l + k - 1;
            if (li >= 0 && li < 7) s += w.values()[(o * 3 + i) * 3 + k] * x.values()[(n * 3 + i) * 7 + li];
          }
        CHECK(y.values()[(n * 4 + o) * 7 + l] == doctest::Approx(s).epsilon(1e-12));
      }
}

TEST_CASE("ops: gradients match finite differences") {
  std::mt19937_64 rng(2);
  check_op([](const auto& t) { return t[0] + t[1]; }, {rand_tensor(rng, {3, 4}), rand_tensor(rng, {4})});
  check_op([](const auto& t) { return t[0] - t[1]; }, {rand_tensor(rng, {3, 1}), rand_tensor(rng, {1, 4})});
  check_op([](const auto& t) { return t[0] * t[1]; }, {rand_tensor(rng, {2, 3, 4}), rand_tensor(rng, {3, 1})});
  check_op([](const auto& t) { return t[0] / t[1]; }, {rand_tensor(rng, {5}), rand_tensor(rng, {5}, 0.5, 2)});
  check_op([](const auto& t) { return atan2(t[0], t[1]); }, {rand_tensor(rng, {6}), rand_tensor(rng, {6}, 0.3, 1)});
  check_op([](const auto& t) { return exp(t[0]) + log(t[1]) + sqrt(t[1]); },
           {rand_tensor(rng, {4}), rand_tensor(rng, {4}, 0.5, 2)});
  check_op([](const auto& t) { return sin(t[0]) * cos(t[0]) + tanh(t[0]) + sigmoid(t[0]) + softplus(t[0]); },
           {rand_tensor(rng, {7}, -3, 3)});
  check_op([](const auto& t) { return elu(t[0]) + square(t[0]) * 0.5 - 1.0; }, {rand_tensor(rng, {9}, -2, 2)});
  check_op([](const auto& t) { return matmul(t[0], t[1]); }, {rand_tensor(rng, {2, 3, 4}), rand_tensor(rng, {4, 5})});
  check_op([](const auto& t) { return left_matmul(t[0], t[1]); },
           {rand_tensor(rng, {3, 4}), rand_tensor(rng, {2, 4, 5})});
  check_op([](const auto& t) { return conv1d(t[0], t[1], t[2]); },
           {rand_tensor(rng, {2, 3, 6}), rand_tensor(rng, {2, 3, 5}), rand_tensor(rng, {2})});
  check_op([](const auto& t) { return permute(reshape(t[0], {2, 3, 4}), {2, 0, 1}); }, {rand_tensor(rng, {6, 4})});
  check_op([](const auto& t) { return slice(t[0], 1, 1, 3); }, {rand_tensor(rng, {2, 4, 3})});
  check_op([](const auto& t) { return concat({t[0], t[1]}, -1); }, {rand_tensor(rng, {2, 2}), rand_tensor(rng, {2, 3})});
  check_op([](const auto& t) { return sum_axis(t[0], 1) + mean_axis(t[0], 1); }, {rand_tensor(rng, {2, 3, 4})});
  check_op([](const auto& t) { return mse(t[0], t[1]) + mean(t[0]); }, {rand_tensor(rng, {3, 3}), rand_tensor(rng, {3, 3})});
}

TEST_CASE("ops: no graph is recorded under NoGradGuard") {
  std::mt19937_64 rng(3);
  auto x = rand_tensor(rng, {3});
  {
    NoGradGuard guard;
    CHECK_FALSE((x * 2.0).requires_grad());
  }
  CHECK((x * 2.0).requires_grad());
  CHECK_FALSE((x.detach() * 2.0).requires_grad());
}

TEST_CASE("adam: minimizes a quadratic and clipping bounds the norm") {
  std::mt19937_64 rng(4);
  ParamStore store;
  auto w = store.add("w", {3}, 1.0, rng);
  Tensor target({3}, {0.5, -1.0, 2.0});
  Adam opt(store, {0.05, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 1000; ++i) {
    store.zero_grad();
    mse(w, target).backward();
    opt.step();
  }
  for (int k = 0; k < 3; ++k) CHECK(w.values()[k] == doctest::Approx(target.values()[k]).epsilon(1e-3));

  store.zero_grad();
  (sum(w) * 100.0).backward();
  const double before = clip_grad_norm(store, 1.0);
  CHECK(before == doctest::Approx(100.0 * std::sqrt(3.0)));
  double after = 0;
  for (double g : w.grad()) after += g * g;
  CHECK(std::sqrt(after) == doctest::Approx(1.0));
}

TEST_CASE("params: hashing tracks values and names are unique") {
  std::mt19937_64 rng(5);
  ParamStore a;
  Linear lin(a, "lin", 3, 2, rng);
  const auto h = a.hash();
  CHECK(a.hash() == h);
  lin.w.mutable_values()[0] += 1e-12;
  CHECK(a.hash() != h);
  CHECK_THROWS_AS(a.add("lin.w", {1}, 0.0, rng), ConfigError);
  CHECK(a.parameter_count() == 8u);
}
