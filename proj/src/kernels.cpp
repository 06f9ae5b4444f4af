#include "tcl/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tcl::kernels {

namespace {

std::atomic<Backend> g_backend{
#ifdef _OPENMP
    Backend::openmp
#else
    Backend::serial
#endif
};

// Below these sizes the fork/join overhead dominates (measured with
// tools/bench_kernels on 2 cores: ~1.5x above the cutoffs, losses below).
constexpr std::size_t kGemmParallelMin = 256 * 1024;  // m*n*k
constexpr std::size_t kMapParallelMin = 128 * 1024;   // elementwise length

inline double dot_entry(bool trans_a, bool trans_b, std::size_t m,
                        std::size_t n, std::size_t k, const double* a,
                        const double* b, std::size_t i, std::size_t j) {
  double acc = 0.0;
  if (!trans_a && !trans_b) {
    const double* ai = a + i * k;
    for (std::size_t l = 0; l < k; ++l) acc += ai[l] * b[l * n + j];
  } else if (!trans_a && trans_b) {
    const double* ai = a + i * k;
    const double* bj = b + j * k;
    for (std::size_t l = 0; l < k; ++l) acc += ai[l] * bj[l];
  } else if (trans_a && !trans_b) {
    for (std::size_t l = 0; l < k; ++l) acc += a[l * m + i] * b[l * n + j];
  } else {
    for (std::size_t l = 0; l < k; ++l) acc += a[l * m + i] * b[j * k + l];
  }
  return acc;
}

}  // namespace

Backend backend() { return g_backend.load(std::memory_order_relaxed); }

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }

bool openmp_compiled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------

namespace serial {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const double* a, const double* b, double* c,
          bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = dot_entry(trans_a, trans_b, m, n, k, a, b, i, j);
      if (accumulate)
        c[i * n + j] += acc;
      else
        c[i * n + j] = acc;
    }
  }
}

void transpose(const double* in, double* out, std::size_t rows,
               std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void axpy(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += a[i] * s;
}

void relu(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void relu_backward(const double* x, const double* up, double* grad,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > 0.0) grad[i] += up[i];
}

void clamp_min(const double* a, double m, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > m ? a[i] : m;
}

void clamp_min_backward(const double* x, double m, const double* up,
                        double* grad, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > m) grad[i] += up[i];
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP variants. Same per-element arithmetic as the serial reference;
// only the outer loop is distributed.
// ---------------------------------------------------------------------------

#ifdef _OPENMP

namespace omp_impl {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const double* a, const double* b, double* c,
          bool accumulate) {
#pragma omp parallel for schedule(static) if (m > 1 && m * n * k >= kGemmParallelMin)
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = dot_entry(trans_a, trans_b, m, n, k, a, b, i, j);
      if (accumulate)
        c[i * n + j] += acc;
      else
        c[i * n + j] = acc;
    }
  }
}

void transpose(const double* in, double* out, std::size_t rows,
               std::size_t cols) {
#pragma omp parallel for schedule(static) if (rows * cols >= kMapParallelMin)
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
}

#define TCL_OMP_MAP(body)                                            \
  _Pragma("omp parallel for schedule(static) if (n >= kMapParallelMin)") \
  for (std::size_t i = 0; i < n; ++i) body

void add(const double* a, const double* b, double* out, std::size_t n) {
  TCL_OMP_MAP({ out[i] = a[i] + b[i]; });
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
  TCL_OMP_MAP({ out[i] = a[i] - b[i]; });
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
  TCL_OMP_MAP({ out[i] = a[i] * b[i]; });
}
void scale(const double* a, double s, double* out, std::size_t n) {
  TCL_OMP_MAP({ out[i] = a[i] * s; });
}
void axpy(const double* a, double s, double* out, std::size_t n) {
  TCL_OMP_MAP({ out[i] += a[i] * s; });
}
void relu(const double* a, double* out, std::size_t n) {
  TCL_OMP_MAP({ out[i] = a[i] > 0.0 ? a[i] : 0.0; });
}
void relu_backward(const double* x, const double* up, double* grad,
                   std::size_t n) {
  TCL_OMP_MAP({
    if (x[i] > 0.0) grad[i] += up[i];
  });
}
void clamp_min(const double* a, double m, double* out, std::size_t n) {
  TCL_OMP_MAP({ out[i] = a[i] > m ? a[i] : m; });
}
void clamp_min_backward(const double* x, double m, const double* up,
                        double* grad, std::size_t n) {
  TCL_OMP_MAP({
    if (x[i] > m) grad[i] += up[i];
  });
}

#undef TCL_OMP_MAP

}  // namespace omp_impl

#define TCL_DISPATCH(fn, ...)                  \
  do {                                         \
    if (backend() == Backend::openmp)          \
      omp_impl::fn(__VA_ARGS__);               \
    else                                       \
      serial::fn(__VA_ARGS__);                 \
  } while (0)

#else

#define TCL_DISPATCH(fn, ...) serial::fn(__VA_ARGS__)

#endif  // _OPENMP

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const double* a, const double* b, double* c,
          bool accumulate) {
  TCL_DISPATCH(gemm, trans_a, trans_b, m, n, k, a, b, c, accumulate);
}
void transpose(const double* in, double* out, std::size_t rows,
               std::size_t cols) {
  TCL_DISPATCH(transpose, in, out, rows, cols);
}
void add(const double* a, const double* b, double* out, std::size_t n) {
  TCL_DISPATCH(add, a, b, out, n);
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
  TCL_DISPATCH(sub, a, b, out, n);
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
  TCL_DISPATCH(mul, a, b, out, n);
}
void scale(const double* a, double s, double* out, std::size_t n) {
  TCL_DISPATCH(scale, a, s, out, n);
}
void axpy(const double* a, double s, double* out, std::size_t n) {
  TCL_DISPATCH(axpy, a, s, out, n);
}
void relu(const double* a, double* out, std::size_t n) {
  TCL_DISPATCH(relu, a, out, n);
}
void relu_backward(const double* x, const double* up, double* grad,
                   std::size_t n) {
  TCL_DISPATCH(relu_backward, x, up, grad, n);
}
void clamp_min(const double* a, double m, double* out, std::size_t n) {
  TCL_DISPATCH(clamp_min, a, m, out, n);
}
void clamp_min_backward(const double* x, double m, const double* up,
                        double* grad, std::size_t n) {
  TCL_DISPATCH(clamp_min_backward, x, m, up, grad, n);
}

#undef TCL_DISPATCH

}  // namespace tcl::kernels
