#include "sgode/kernels.hpp"

#include <cstring>

namespace sgode::kern {

namespace {
// Below this many multiply-adds the omp fork/join overhead dominates.
constexpr double kParallelCutoff = 64 * 1024;
}  // namespace

void matmul(const double* a, int m, int k, const double* b, int n, double* c,
            bool acc) {
  const bool par = static_cast<double>(m) * k * n > kParallelCutoff && m > 1;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!acc) std::memset(ci, 0, sizeof(double) * n);
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_nt(const double* a, int m, int k, const double* b, int n,
               double* c, bool acc) {
  const bool par = static_cast<double>(m) * k * n > kParallelCutoff && m > 1;
#pragma omp parallel for schedule(static) if (par)
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void matmul_tn(const double* a, int k, int m, const double* b, int n,
               double* c, bool acc) {
  const bool par = static_cast<double>(m) * k * n > kParallelCutoff && m > 1;
#pragma omp parallel for schedule(static) if (par)
  for (int r = 0; r < m; ++r) {
    double* cr = c + static_cast<std::size_t>(r) * n;
    if (!acc) std::memset(cr, 0, sizeof(double) * n);
    for (int i = 0; i < k; ++i) {
      const double air = a[static_cast<std::size_t>(i) * m + r];
      const double* bi = b + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) cr[j] += air * bi[j];
    }
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t len) {
#pragma omp parallel for schedule(static) if (len > 16384)
  for (std::size_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

namespace serial {

void matmul(const double* a, int m, int k, const double* b, int n, double* c,
            bool acc) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<std::size_t>(i) * n;
    if (!acc) std::memset(ci, 0, sizeof(double) * n);
    const double* ai = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_nt(const double* a, int m, int k, const double* b, int n,
               double* c, bool acc) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<std::size_t>(i) * k;
    double* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* bj = b + static_cast<std::size_t>(j) * k;
      double s = 0.0;
      for (int p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = acc ? ci[j] + s : s;
    }
  }
}

void matmul_tn(const double* a, int k, int m, const double* b, int n,
               double* c, bool acc) {
  for (int r = 0; r < m; ++r) {
    double* cr = c + static_cast<std::size_t>(r) * n;
    if (!acc) std::memset(cr, 0, sizeof(double) * n);
    for (int i = 0; i < k; ++i) {
      const double air = a[static_cast<std::size_t>(i) * m + r];
      const double* bi = b + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) cr[j] += air * bi[j];
    }
  }
}

void axpy(double alpha, const double* x, double* y, std::size_t len) {
  for (std::size_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

}  // namespace serial

}  // namespace sgode::kern
