#pragma once

#include <cstddef>

// Dense row-major kernels. The omp variants parallelize over output rows
// only; every output element is still reduced in a fixed serial order, so
// results are bitwise identical to the serial reference for any thread
// count. The serial namespace keeps the plain-loop reference used by the
// tests and the kernel benchmark.

namespace sgode::kern {

// c(m x n) = a(m x k) * b(k x n); accumulates into c when acc is set.
void matmul(const double* a, int m, int k, const double* b, int n, double* c,
            bool acc = false);

// c(m x n) = a(m x k) * b(n x k)^T
void matmul_nt(const double* a, int m, int k, const double* b, int n,
               double* c, bool acc = false);

// c(m x n) = a(k x m)^T * b(k x n)
void matmul_tn(const double* a, int k, int m, const double* b, int n,
               double* c, bool acc = false);

// y += alpha * x over len entries.
void axpy(double alpha, const double* x, double* y, std::size_t len);

namespace serial {
void matmul(const double* a, int m, int k, const double* b, int n, double* c,
            bool acc = false);
void matmul_nt(const double* a, int m, int k, const double* b, int n,
               double* c, bool acc = false);
void matmul_tn(const double* a, int k, int m, const double* b, int n,
               double* c, bool acc = false);
void axpy(double alpha, const double* x, double* y, std::size_t len);
}  // namespace serial

}  // namespace sgode::kern
