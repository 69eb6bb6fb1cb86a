#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hit/numerics/tape.h"

// Differentiable primitives recorded on a Tape. Matrices follow the
// rows() x cols() view of Tensor; a "column" result has shape [rows x 1] and a
// scalar result has shape [1 x 1]. Only what the model needs is provided.
namespace hit::ops {

// Guard used by every norm division: ||v|| is replaced by max(||v||, kNormEpsilon).
inline constexpr double kNormEpsilon = 1e-12;

// Numerically stable logistic function.
template <typename T>
T sigmoid(T x);

// a[m x k] * b[k x n]
template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b);

// Elementwise sum of equally shaped tensors.
template <typename T>
Var add(Tape<T>& tape, Var a, Var b);

// x[m x n] plus a [1 x n] bias added to every row.
template <typename T>
Var add_bias(Tape<T>& tape, Var x, Var bias);

template <typename T>
Var relu(Tape<T>& tape, Var x);

template <typename T>
Var sigmoid(Tape<T>& tape, Var x);

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor);

// Column-wise concatenation of matrices with equal row counts.
template <typename T>
Var concat(Tape<T>& tape, std::span<const Var> parts);

// Sum of all elements, as [1 x 1].
template <typename T>
Var sum(Tape<T>& tape, Var x);

// Each row divided by max(||row||, kNormEpsilon).
template <typename T>
Var l2_normalize(Tape<T>& tape, Var x);

// Row-wise cosine similarity with guarded norms, as [m x 1].
template <typename T>
Var cosine_similarity(Tape<T>& tape, Var a, Var b);

// Row-wise inner product, as [m x 1].
template <typename T>
Var row_dot(Tape<T>& tape, Var a, Var b);

// Row-wise mean squared and mean absolute differences, as [m x 1].
template <typename T>
Var row_mse(Tape<T>& tape, Var a, Var b);
template <typename T>
Var row_mae(Tape<T>& tape, Var a, Var b);

// sum_i weights[i] * x[i] for a column x[m x 1], as [1 x 1].
template <typename T>
Var weighted_sum(Tape<T>& tape, Var x, std::span<const T> weights);

// Mean binary cross-entropy of sigmoid(logits) against labels in {0, 1},
// evaluated in logit form. logits is [m x 1].
template <typename T>
Var sigmoid_cross_entropy(Tape<T>& tape, Var logits, std::span<const T> labels);

// Row-wise max-then-sum over heads: for every row, the sum over user heads of
// the maximum inner product with any ad head. Inputs are [m x heads*head_dim]
// in head-major layout; the result is [m x 1]. The subgradient routes through
// the lowest-index maximizing ad head.
template <typename T>
Var max_then_sum(Tape<T>& tape, Var user_heads, Var ad_heads, std::size_t heads,
                 std::size_t head_dim);

// Rows of table[v x d] selected by `indices`, as [indices.size() x d].
// Gradients scatter-add into the selected rows only.
template <typename T>
Var gather_rows(Tape<T>& tape, Var table, std::span<const std::uint32_t> indices);

// Value-identical copy whose edge blocks all gradient flow.
template <typename T>
Var stop_gradient(Tape<T>& tape, Var x);

}  // namespace hit::ops
