#include "hit/numerics/kernels.h"

#include <algorithm>
#include <vector>

namespace hit::kernels {

template <typename T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
          std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c.begin(), c.end(), T(0));
  const T* __restrict pa = a.data();
  const T* __restrict pb = b.data();
  T* __restrict pc = c.data();
  for (std::size_t i = 0; i < m; ++i) {
    T* __restrict crow = pc + i * n;
    const T* arow = pa + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = arow[p];
      if (aip == T(0)) continue;  // post-ReLU inputs are sparse
      const T* __restrict brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <typename T>
void gemm_at_b(std::span<const T> a, std::span<const T> g, std::span<T> c,
               std::size_t m, std::size_t k, std::size_t n) {
  const T* __restrict pa = a.data();
  const T* __restrict pg = g.data();
  T* __restrict pc = c.data();
  for (std::size_t r = 0; r < m; ++r) {
    const T* arow = pa + r * k;
    const T* __restrict grow = pg + r * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T arp = arow[p];
      if (arp == T(0)) continue;
      T* __restrict crow = pc + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += arp * grow[j];
    }
  }
}

template <typename T>
void gemm_a_bt(std::span<const T> g, std::span<const T> b, std::span<T> c,
               std::size_t m, std::size_t k, std::size_t n) {
  // Transposing b once turns the product into the vectorizable gemm layout.
  std::vector<T> bt(n * k);
  for (std::size_t p = 0; p < k; ++p) {
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  }
  gemm<T>(g, bt, c, m, n, k, /*accumulate=*/true);
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  T s = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
T max_then_sum(std::span<const T> user_heads, std::span<const T> ad_heads,
               std::size_t heads, std::size_t head_dim, std::span<std::size_t> winners) {
  T total = T(0);
  for (std::size_t ju = 0; ju < heads; ++ju) {
    const auto u = user_heads.subspan(ju * head_dim, head_dim);
    T best = dot<T>(u, ad_heads.subspan(0, head_dim));
    std::size_t best_index = 0;
    for (std::size_t ja = 1; ja < heads; ++ja) {
      const T s = dot<T>(u, ad_heads.subspan(ja * head_dim, head_dim));
      if (s > best) {
        best = s;
        best_index = ja;
      }
    }
    if (!winners.empty()) winners[ju] = best_index;
    total += best;
  }
  return total;
}

#define HIT_INSTANTIATE_KERNELS(T)                                                    \
  template void gemm<T>(std::span<const T>, std::span<const T>, std::span<T>,          \
                        std::size_t, std::size_t, std::size_t, bool);                  \
  template void gemm_at_b<T>(std::span<const T>, std::span<const T>, std::span<T>,     \
                             std::size_t, std::size_t, std::size_t);                   \
  template void gemm_a_bt<T>(std::span<const T>, std::span<const T>, std::span<T>,     \
                             std::size_t, std::size_t, std::size_t);                   \
  template T dot<T>(std::span<const T>, std::span<const T>);                           \
  template T max_then_sum<T>(std::span<const T>, std::span<const T>, std::size_t,      \
                             std::size_t, std::span<std::size_t>);

HIT_INSTANTIATE_KERNELS(float)
HIT_INSTANTIATE_KERNELS(double)

#undef HIT_INSTANTIATE_KERNELS

}  // namespace hit::kernels
