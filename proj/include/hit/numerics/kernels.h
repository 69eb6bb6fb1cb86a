#pragma once

#include <cstddef>
#include <span>

namespace hit::kernels {

// Raw dense kernels shared by the autodiff primitives and the serving path.
//
// Row independence: every output row depends only on the matching input row
// and the accumulation order over the reduction index is fixed (ascending).
// A row therefore produces bit-identical results whether it is computed alone
// or inside a batch of any size, which is what makes cached serving scores
// equal to full-forward scores exactly.

// c[m x n] (+)= a[m x k] * b[k x n]
template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate);

// c[k x n] += a[m x k]^T * g[m x n]
template <typename T>
void gemm_at_b(std::span<const T> a, std::span<const T> g, std::span<T> c,
               std::size_t m, std::size_t k, std::size_t n);

// c[m x k] += g[m x n] * b[k x n]^T
template <typename T>
void gemm_a_bt(std::span<const T> g, std::span<const T> b, std::span<T> c,
               std::size_t m, std::size_t k, std::size_t n);

template <typename T>
T dot(std::span<const T> a, std::span<const T> b);

// Sum over user heads of the best-matching ad head's inner product. Both
// inputs are head-major: head j occupies [j*z, (j+1)*z). When `winners` is
// non-empty it receives, per user head, the lowest ad-head index attaining
// the maximum.
template <typename T>
T max_then_sum(std::span<const T> user_heads, std::span<const T> ad_heads,
               std::size_t heads, std::size_t head_dim,
               std::span<std::size_t> winners = {});

}  // namespace hit::kernels
