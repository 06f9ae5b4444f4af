#pragma once

#include <cstddef>

// Dense kernels behind the tensor ops. Every kernel has a serial reference
// and an OpenMP variant; the two are bitwise identical because each output
// element is written by exactly one thread and its inner accumulation order
// is the same in both paths. Reductions that would need a parallel sum
// (dot, norm, log-sum-exp) stay serial in the tensor layer for that reason.
namespace tcl::kernels {

enum class Backend { serial, openmp };

Backend backend();
void set_backend(Backend b);
bool openmp_compiled();
int max_threads();

// c (m x n) = op(a) * op(b), or += when accumulate is set.
// op(a) is a (m x k) row-major, or a stored (k x m) read transposed.
// op(b) is b (k x n) row-major, or b stored (n x k) read transposed.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const double* a, const double* b, double* c,
          bool accumulate);

void transpose(const double* in, double* out, std::size_t rows,
               std::size_t cols);

void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
// out += a * s
void axpy(const double* a, double s, double* out, std::size_t n);
void relu(const double* a, double* out, std::size_t n);
// grad += up where x > 0
void relu_backward(const double* x, const double* up, double* grad,
                   std::size_t n);
void clamp_min(const double* a, double m, double* out, std::size_t n);
void clamp_min_backward(const double* x, double m, const double* up,
                        double* grad, std::size_t n);

// Serial-only reference versions, kept public so tests and the benchmark can
// compare them against whatever backend() dispatches to.
namespace serial {
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const double* a, const double* b, double* c,
          bool accumulate);
void transpose(const double* in, double* out, std::size_t rows,
               std::size_t cols);
void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const double* a, double s, double* out, std::size_t n);
void axpy(const double* a, double s, double* out, std::size_t n);
void relu(const double* a, double* out, std::size_t n);
void relu_backward(const double* x, const double* up, double* grad,
                   std::size_t n);
void clamp_min(const double* a, double m, double* out, std::size_t n);
void clamp_min_backward(const double* x, double m, const double* up,
                        double* grad, std::size_t n);
}  // namespace serial

}  // namespace tcl::kernels
