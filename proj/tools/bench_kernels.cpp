// Timing comparison of the serial reference kernels against the OpenMP
// variants, plus an end-to-end encoder forward/backward at training shapes.

#include <chrono>
#include <cstdio>
#include <vector>

#include "tcl/encoder.hpp"
#include "tcl/kernels.hpp"
#include "tcl/rng.hpp"
#include "tcl/tensor.hpp"

using namespace tcl;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm up
  const auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() /
         reps;
}

void bench_gemm(std::size_t m, std::size_t n, std::size_t k, int reps) {
  Rng rng(1);
  std::vector<double> a(m * k), b(k * n), c(m * n);
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = rng.normal();

  const double serial_ms = time_ms(reps, [&] {
    kernels::serial::gemm(false, false, m, n, k, a.data(), b.data(), c.data(),
                          false);
  });
  kernels::set_backend(kernels::Backend::openmp);
  const double omp_ms = time_ms(reps, [&] {
    kernels::gemm(false, false, m, n, k, a.data(), b.data(), c.data(), false);
  });
  const double gflop = 2.0 * m * n * k * 1e-6;  // per call, in MFLOP -> ms
  std::printf("gemm %4zux%-4zux%-4zu  serial %8.3f ms (%6.2f GF/s)  omp %8.3f ms (%6.2f GF/s)  speedup %.2fx\n",
              m, n, k, serial_ms, gflop / serial_ms, omp_ms, gflop / omp_ms,
              serial_ms / omp_ms);
}

void bench_elementwise(std::size_t n, int reps) {
  Rng rng(2);
  std::vector<double> a(n), b(n), out(n);
  for (double& x : a) x = rng.normal();
  for (double& x : b) x = rng.normal();
  const double serial_ms =
      time_ms(reps, [&] { kernels::serial::add(a.data(), b.data(), out.data(), n); });
  kernels::set_backend(kernels::Backend::openmp);
  const double omp_ms =
      time_ms(reps, [&] { kernels::add(a.data(), b.data(), out.data(), n); });
  std::printf("add  n=%-9zu       serial %8.3f ms                 omp %8.3f ms                 speedup %.2fx\n",
              n, serial_ms, omp_ms, serial_ms / omp_ms);
}

void bench_encoder(int reps) {
  EncoderConfig cfg;  // training-shape per-frame MLP
  cfg.input_dim = 256;
  cfg.hidden = {64};
  cfg.classes = 8;
  Encoder enc = Encoder::init(cfg, 3);
  Rng rng(4);
  // one combined batch worth of frames: 8 labeled fast clips + 24 pairs
  std::vector<Tensor> clips;
  for (int i = 0; i < 8 + 24; ++i) clips.push_back(Tensor::zeros({8, 256}));
  for (int i = 0; i < 24; ++i) clips.push_back(Tensor::zeros({4, 256}));
  for (Tensor& c : clips)
    for (double& v : c.values()) v = rng.uniform();

  auto step = [&] {
    enc.zero_grad();
    GradientTape tape;
    std::vector<Tensor> reps = enc.encode_clips(clips);
    std::vector<Tensor> sums;
    for (const Tensor& r : reps) sums.push_back(sum(r));
    tape.backward(mean_axis(concat(sums), 0));
  };

  kernels::set_backend(kernels::Backend::serial);
  const double serial_ms = time_ms(reps, step);
  kernels::set_backend(kernels::Backend::openmp);
  const double omp_ms = time_ms(reps, step);
  std::printf("encoder fwd+bwd batch  serial %8.3f ms                 omp %8.3f ms                 speedup %.2fx\n",
              serial_ms, omp_ms, serial_ms / omp_ms);
}

}  // namespace

int main() {
  std::printf("backend: openmp compiled = %s, max threads = %d\n",
              kernels::openmp_compiled() ? "yes" : "no",
              kernels::max_threads());
  for (auto [m, n, k] :
       {std::array<std::size_t, 3>{32, 64, 256},
        std::array<std::size_t, 3>{128, 128, 128},
        std::array<std::size_t, 3>{256, 256, 256},
        std::array<std::size_t, 3>{512, 512, 512}})
    bench_gemm(m, n, k, m >= 512 ? 3 : 20);
  bench_elementwise(1 << 16, 200);
  bench_elementwise(1 << 20, 20);
  bench_encoder(10);
  kernels::set_backend(kernels::Backend::openmp);
  return 0;
}
