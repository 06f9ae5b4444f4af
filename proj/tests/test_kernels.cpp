#include <doctest.h>

#include <vector>

#include "tcl/kernels.hpp"
#include "tcl/rng.hpp"

using namespace tcl;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("openmp gemm is bitwise identical to the serial reference") {
  if (!kernels::openmp_compiled()) return;
  Rng rng(42);
  // Mix of tiny and above-cutoff sizes, all four transpose combinations.
  const std::size_t dims[][3] = {
      {1, 1, 1}, {3, 5, 7}, {8, 8, 8}, {33, 17, 9}, {64, 96, 128}};
  for (auto [m, n, k] : dims) {
    for (bool ta : {false, true}) {
      for (bool tb : {false, true}) {
        auto a = random_vec(rng, m * k);
        auto b = random_vec(rng, k * n);
        auto c0 = random_vec(rng, m * n);
        for (bool acc : {false, true}) {
          std::vector<double> serial_out = c0, omp_out = c0;
          kernels::serial::gemm(ta, tb, m, n, k, a.data(), b.data(),
                                serial_out.data(), acc);
          kernels::set_backend(kernels::Backend::openmp);
          kernels::gemm(ta, tb, m, n, k, a.data(), b.data(), omp_out.data(),
                        acc);
          REQUIRE(serial_out == omp_out);
        }
      }
    }
  }
  kernels::set_backend(kernels::Backend::openmp);
}

TEST_CASE("gemm computes the right product") {
  // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
  std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8}, c(4, 0.0);
  kernels::serial::gemm(false, false, 2, 2, 2, a.data(), b.data(), c.data(),
                        false);
  CHECK(c == std::vector<double>{19, 22, 43, 50});

  // transpose flags: op(A)=A^T with A stored 2x2 -> [1 3; 2 4] * B
  kernels::serial::gemm(true, false, 2, 2, 2, a.data(), b.data(), c.data(),
                        false);
  CHECK(c == std::vector<double>{26, 30, 38, 44});

  // op(B)=B^T: A * [5 7; 6 8]
  kernels::serial::gemm(false, true, 2, 2, 2, a.data(), b.data(), c.data(),
                        false);
  CHECK(c == std::vector<double>{17, 23, 39, 53});
}

TEST_CASE("elementwise kernels match between backends") {
  if (!kernels::openmp_compiled()) return;
  Rng rng(7);
  for (std::size_t n : {8u, 1000u, 40000u}) {
    auto a = random_vec(rng, n);
    auto b = random_vec(rng, n);
    std::vector<double> s(n), p(n);

    kernels::serial::add(a.data(), b.data(), s.data(), n);
    kernels::set_backend(kernels::Backend::openmp);
    kernels::add(a.data(), b.data(), p.data(), n);
    CHECK(s == p);

    kernels::serial::relu(a.data(), s.data(), n);
    kernels::relu(a.data(), p.data(), n);
    CHECK(s == p);

    std::vector<double> gs = random_vec(rng, n), gp = gs;
    kernels::serial::relu_backward(a.data(), b.data(), gs.data(), n);
    kernels::relu_backward(a.data(), b.data(), gp.data(), n);
    CHECK(gs == gp);
  }
  kernels::set_backend(kernels::Backend::openmp);
}

TEST_CASE("transpose round-trips") {
  Rng rng(3);
  auto a = random_vec(rng, 6 * 4);
  std::vector<double> t(24), back(24);
  kernels::transpose(a.data(), t.data(), 6, 4);
  kernels::transpose(t.data(), back.data(), 4, 6);
  CHECK(a == back);
}
