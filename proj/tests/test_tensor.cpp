#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "tcl/gradcheck.hpp"
#include "tcl/rng.hpp"
#include "tcl/tensor.hpp"

using namespace tcl;

TEST_CASE("relu forward") {
  Tensor x = Tensor::from({3}, {-1, 0, 2});
  Tensor y = relu(x);
  CHECK(y.values() == std::vector<double>{0, 0, 2});
}

TEST_CASE("mean over axis 0") {
  Tensor x = Tensor::from({2, 2}, {1, 3, 5, 7});
  Tensor m = mean_axis(x, 0);
  CHECK(m.values() == std::vector<double>{3, 5});
  Tensor m1 = mean_axis(x, 1);
  CHECK(m1.values() == std::vector<double>{2, 6});
}

TEST_CASE("log_sum_exp uses the shifted form and does not overflow") {
  Tensor x = Tensor::from({2}, {1000.0, 1000.0});
  Tensor y = log_sum_exp(x);
  CHECK(y.item() == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-15));

  // shifted-exponent hand computation at moderate values
  Tensor z = Tensor::from({3}, {0.3, -1.2, 2.5});
  const double m = 2.5;
  const double expect =
      m + std::log(std::exp(0.3 - m) + std::exp(-1.2 - m) + std::exp(2.5 - m));
  CHECK(log_sum_exp(z).item() == doctest::Approx(expect).epsilon(1e-15));

  // exact identity max(x) + log(sum(exp(x - max))) for large magnitudes
  Tensor big = Tensor::from({3}, {1e6, -1e6, 999999.0});
  const double bm = 1e6;
  const double bexpect = bm + std::log(std::exp(0.0) + std::exp(-2e6) +
                                       std::exp(999999.0 - bm));
  CHECK(log_sum_exp(big).item() == bexpect);
}

TEST_CASE("backward of sum is all ones") {
  Tensor x = Tensor::from({4}, {1, 2, 3, 4}, true);
  GradientTape tape;
  Tensor loss = sum(x);
  tape.backward(loss);
  CHECK(x.grad() == std::vector<double>(4, 1.0));
}

TEST_CASE("backward of sum of squares is 2x") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  GradientTape tape;
  Tensor loss = sum(mul(x, x));
  tape.backward(loss);
  CHECK(x.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("backward errors") {
  Tensor x = Tensor::from({3}, {1, 2, 3}, true);
  SUBCASE("non-scalar loss") {
    GradientTape tape;
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(tape.backward(y), TensorError);
  }
  SUBCASE("double backward without re-running forward") {
    GradientTape tape;
    Tensor loss = sum(x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), TensorError);
  }
  SUBCASE("no tracked inputs") {
    GradientTape tape;
    Tensor c = Tensor::from({1}, {3.0});
    CHECK_THROWS_AS(tape.backward(c), TensorError);
  }
}

TEST_CASE("shape mismatch raises") {
  Tensor a = Tensor::from({2}, {1, 2});
  Tensor b = Tensor::from({3}, {1, 2, 3});
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(dot(a, b), ShapeError);
  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(matmul(m, Tensor::from({3, 1}, {1, 2, 3})), ShapeError);
}

TEST_CASE("non-finite results abort") {
  Tensor z = Tensor::from({1}, {0.0});
  CHECK_THROWS_AS(log(z), NonFiniteError);
  Tensor big = Tensor::from({1}, {1e308});
  CHECK_THROWS_AS(mul(big, big), NonFiniteError);
}

TEST_CASE("no gradient is recorded without an active tape") {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tensor y = mul(x, x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("finite differences: sum of squares at x=[3]") {
  auto f = [](const Tensor& t) {
    double acc = 0;
    for (double v : t.values()) acc += v * v;
    return acc;
  };
  Tensor x = Tensor::from({1}, {3.0});
  auto g = finite_difference_gradient(f, x, 1e-5);
  CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-8));
}

TEST_CASE("finite differences: constant function gives zero") {
  auto f = [](const Tensor&) { return 4.25; };
  Tensor x = Tensor::from({5}, {1, 2, 3, 4, 5});
  auto g = finite_difference_gradient(f, x, 1e-5);
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("every differentiable op passes the finite-difference check") {
  Rng rng(2024);
  auto random_tensor = [&rng](Shape s) {
    Tensor t = Tensor::zeros(std::move(s));
    for (double& v : t.values()) v = rng.normal();
    return t;
  };

  int trials = 0;
  for (int rep = 0; rep < 25; ++rep) {
    // binary elementwise against a fixed partner
    Tensor partner = random_tensor({6});
    for (auto op : {add, sub, mul}) {
      Tensor x = random_tensor({6});
      double err = gradient_check(
          [&](const Tensor& t) { return sum(mul(op(t, partner), op(t, partner))); },
          x);
      CHECK(err < 1e-6);
      ++trials;
    }

    // matmul, transpose, slicing, concat, reshape, means
    Tensor m = random_tensor({3, 4});
    Tensor w = random_tensor({4, 2});
    double err = gradient_check(
        [&](const Tensor& t) { return sum(mul(matmul(t, w), matmul(t, w))); },
        m);
    CHECK(err < 1e-6);
    err = gradient_check(
        [&](const Tensor& t) {
          Tensor s = slice(transpose(t), 1, 3);
          std::array cat{reshape(s, Shape{6}), Tensor::ones({2})};
          return log_sum_exp(concat(cat));
        },
        m);
    CHECK(err < 1e-6);
    err = gradient_check(
        [&](const Tensor& t) { return sum(mul(mean_axis(t, 0), mean_axis(t, 0))); },
        m);
    CHECK(err < 1e-6);
    err = gradient_check(
        [&](const Tensor& t) { return sum(exp(scale(mean_axis(t, 1), 0.5))); },
        m);
    CHECK(err < 1e-6);

    // norms, dot, kernels of the losses
    Tensor u = random_tensor({8});
    Tensor v = random_tensor({8});
    err = gradient_check(
        [&](const Tensor& t) {
          Tensor n = clamp_min(l2_norm(t), 1e-12);
          return div_by_scalar(dot(t, v), n);
        },
        u);
    CHECK(err < 1e-6);
    err = gradient_check(
        [&](const Tensor& t) { return log(clamp_min(sum(mul(t, t)), 0.1)); },
        u);
    CHECK(err < 1e-6);
    err = gradient_check([&](const Tensor& t) { return sum(relu(t)); }, u);
    CHECK(err < 1e-6);
    trials += 7;
  }
  CHECK(trials >= 100);
}

TEST_CASE("backward of a sum of losses equals the sum of backwards") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> vals(6);
    for (double& v : vals) v = rng.normal();

    auto loss1 = [](const Tensor& t) { return sum(mul(t, t)); };
    auto loss2 = [](const Tensor& t) { return log_sum_exp(t); };

    Tensor x = Tensor::from({6}, vals, true);
    {
      GradientTape tape;
      tape.backward(add(loss1(x), loss2(x)));
    }
    std::vector<double> combined = x.grad();

    Tensor y = Tensor::from({6}, vals, true);
    std::vector<double> separate(6, 0.0);
    {
      GradientTape tape;
      tape.backward(loss1(y));
    }
    for (std::size_t i = 0; i < 6; ++i) separate[i] += y.grad()[i];
    y.zero_grad();
    {
      GradientTape tape;
      tape.backward(loss2(y));
    }
    for (std::size_t i = 0; i < 6; ++i) separate[i] += y.grad()[i];

    CHECK(combined == separate);
  }
}

TEST_CASE("rng streams are reproducible and serializable") {
  Rng a(123, "stream");
  Rng b(123, "stream");
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

  std::string state = a.save_state();
  std::vector<double> expect;
  for (int i = 0; i < 10; ++i) expect.push_back(a.normal());
  Rng c(0);
  c.restore_state(state);
  for (int i = 0; i < 10; ++i) REQUIRE(c.normal() == expect[i]);

  Rng d(123, "other");
  Rng e(124, "stream");
  CHECK(Rng(123, "stream").next_u64() != d.next_u64());
  CHECK(Rng(123, "stream").next_u64() != e.next_u64());
}

TEST_CASE("uniform_int covers its range uniformly enough") {
  Rng rng(99);
  std::array<int, 7> counts{};
  for (int i = 0; i < 7000; ++i) counts[rng.uniform_int(7)]++;
  for (int c : counts) {
    CHECK(c > 800);
    CHECK(c < 1200);
  }
}
