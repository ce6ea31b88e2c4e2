#include "godin/kernels.hpp"

#include <algorithm>

namespace godin::kernels {
namespace {

// Row kernels shared by both variants; the parallel versions only distribute
// rows across threads.

inline void matmul_row(const double* a, const double* b, double* c, std::size_t i,
                       std::size_t k, std::size_t m) {
  double* crow = c + i * m;
  std::fill(crow, crow + m, 0.0);
  const double* arow = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = arow[p];
    const double* brow = b + p * m;
    for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* c, std::size_t i,
                          std::size_t p, std::size_t q) {
  const double* arow = a + i * p;
  for (std::size_t j = 0; j < q; ++j) {
    const double* brow = b + j * p;
    double s = 0.0;
    for (std::size_t t = 0; t < p; ++t) s += arow[t] * brow[t];
    c[i * q + j] = s;
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* c, std::size_t i,
                          std::size_t p, std::size_t n, std::size_t q) {
  double* crow = c + i * q;
  std::fill(crow, crow + q, 0.0);
  for (std::size_t t = 0; t < p; ++t) {
    const double ati = a[t * n + i];
    const double* brow = b + t * q;
    for (std::size_t j = 0; j < q; ++j) crow[j] += ati * brow[j];
  }
}

inline void pairwise_row(const double* a, const double* w, double* c, std::size_t i,
                         std::size_t d, std::size_t m) {
  const double* arow = a + i * d;
  for (std::size_t j = 0; j < m; ++j) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
      const double diff = arow[t] - w[t * m + j];
      s += diff * diff;
    }
    c[i * m + j] = s;
  }
}

}  // namespace

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) matmul_row(a.data(), b.data(), c.data(), i, k, m);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t n, std::size_t p, std::size_t q) {
  for (std::size_t i = 0; i < n; ++i) matmul_nt_row(a.data(), b.data(), c.data(), i, p, q);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t p, std::size_t n, std::size_t q) {
  for (std::size_t i = 0; i < n; ++i) matmul_tn_row(a.data(), b.data(), c.data(), i, p, n, q);
}

void pairwise_sq_dist(std::span<const double> a, std::span<const double> w, std::span<double> c,
                      std::size_t n, std::size_t d, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) pairwise_row(a.data(), w.data(), c.data(), i, d, m);
}

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t n, std::size_t k, std::size_t m) {
  const bool wide = n * k * m >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (wide)
  for (std::size_t i = 0; i < n; ++i) matmul_row(a.data(), b.data(), c.data(), i, k, m);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t n, std::size_t p, std::size_t q) {
  const bool wide = n * p * q >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (wide)
  for (std::size_t i = 0; i < n; ++i) matmul_nt_row(a.data(), b.data(), c.data(), i, p, q);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t p, std::size_t n, std::size_t q) {
  const bool wide = n * p * q >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (wide)
  for (std::size_t i = 0; i < n; ++i) matmul_tn_row(a.data(), b.data(), c.data(), i, p, n, q);
}

void pairwise_sq_dist(std::span<const double> a, std::span<const double> w, std::span<double> c,
                      std::size_t n, std::size_t d, std::size_t m) {
  const bool wide = n * d * m >= kParallelThreshold;
#pragma omp parallel for schedule(static) if (wide)
  for (std::size_t i = 0; i < n; ++i) pairwise_row(a.data(), w.data(), c.data(), i, d, m);
}

}  // namespace parallel
}  // namespace godin::kernels
