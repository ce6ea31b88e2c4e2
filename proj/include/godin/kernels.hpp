#pragma once

// Dense kernels behind the tensor ops. Every kernel has a serial reference
// and an OpenMP version; both evaluate each output element with the same
// code and summation order, so their results are bit-identical.

#include <cstddef>
#include <span>

namespace godin::kernels {

namespace serial {

// c[n,m] = a[n,k] * b[k,m]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t n, std::size_t k, std::size_t m);
// c[n,q] = a[n,p] * b[q,p]^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t n, std::size_t p, std::size_t q);
// c[n,q] = a[p,n]^T * b[p,q]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t p, std::size_t n, std::size_t q);
// c[n,m] = ||a_i - w_col_j||^2, a[n,d], w[d,m]
void pairwise_sq_dist(std::span<const double> a, std::span<const double> w, std::span<double> c,
                      std::size_t n, std::size_t d, std::size_t m);

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t n, std::size_t k, std::size_t m);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t n, std::size_t p, std::size_t q);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t p, std::size_t n, std::size_t q);
void pairwise_sq_dist(std::span<const double> a, std::span<const double> w, std::span<double> c,
                      std::size_t n, std::size_t d, std::size_t m);

}  // namespace parallel

// Work (multiply-adds) below which the parallel kernels stay on one thread.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

}  // namespace godin::kernels
