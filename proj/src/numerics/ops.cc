#include "hit/numerics/ops.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "hit/error.h"
#include "hit/numerics/kernels.h"

namespace hit::ops {

namespace {

template <typename T>
using Edges = std::vector<typename Tape<T>::Edge>;

template <typename T>
Edges<T> edges(std::initializer_list<Var> inputs) {
  Edges<T> out;
  for (Var v : inputs) out.push_back({v, false});
  return out;
}

std::string describe(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
         shape_string(b);
}

template <typename T>
void require_same_shape(const Tape<T>& tape, Var a, Var b, const char* op) {
  const auto& sa = tape.value(a);
  const auto& sb = tape.value(b);
  if (sa.rows() != sb.rows() || sa.cols() != sb.cols()) {
    throw DimensionError(describe(op, sa.shape(), sb.shape()));
  }
}

// Handle the next recorded node will receive; lets a backward closure read
// its own output value.
template <typename T>
Var next_var(const Tape<T>& tape) {
  return Var{static_cast<std::uint32_t>(tape.size())};
}

template <typename T>
T guarded_norm(std::span<const T> v) {
  T s = T(0);
  for (T x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

template <typename T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  const std::size_t m = va.rows(), k = va.cols(), n = vb.cols();
  if (vb.rows() != k) throw DimensionError(describe("matmul", va.shape(), vb.shape()));
  Tensor<T> out({m, n});
  kernels::gemm<T>(va.data(), vb.data(), out.data(), m, k, n, false);
  return tape.record(
      std::move(out), edges<T>({a, b}),
      [a, b, m, k, n](Tape<T>& t, const Tensor<T>& g) {
        if (t.requires_grad(a)) {
          kernels::gemm_a_bt<T>(g.data(), t.value(b).data(), t.grad(a).data(), m, k, n);
        }
        if (t.requires_grad(b)) {
          kernels::gemm_at_b<T>(t.value(a).data(), g.data(), t.grad(b).data(), m, k, n);
        }
      },
      "matmul");
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape, a, b, "add");
  Tensor<T> out = tape.value(a);
  auto o = out.data();
  auto vb = tape.value(b).data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += vb[i];
  return tape.record(
      std::move(out), edges<T>({a, b}),
      [a, b](Tape<T>& t, const Tensor<T>& g) {
        for (Var v : {a, b}) {
          if (!t.requires_grad(v)) continue;
          auto dst = t.grad(v).data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
        }
      },
      "add");
}

template <typename T>
Var add_bias(Tape<T>& tape, Var x, Var bias) {
  const auto& vx = tape.value(x);
  const auto& vb = tape.value(bias);
  const std::size_t m = vx.rows(), n = vx.cols();
  if (vb.size() != n) throw DimensionError(describe("add_bias", vx.shape(), vb.shape()));
  Tensor<T> out = vx;
  for (std::size_t r = 0; r < m; ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < n; ++j) row[j] += vb[j];
  }
  return tape.record(
      std::move(out), edges<T>({x, bias}),
      [x, bias, m, n](Tape<T>& t, const Tensor<T>& g) {
        if (t.requires_grad(x)) {
          auto dst = t.grad(x).data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
        }
        if (t.requires_grad(bias)) {
          auto dst = t.grad(bias).data();
          for (std::size_t r = 0; r < m; ++r) {
            auto grow = g.row(r);
            for (std::size_t j = 0; j < n; ++j) dst[j] += grow[j];
          }
        }
      },
      "add_bias");
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.data()) v = v > T(0) ? v : T(0);
  return tape.record(
      std::move(out), edges<T>({x}),
      [x](Tape<T>& t, const Tensor<T>& g) {
        auto in = t.value(x).data();
        auto dst = t.grad(x).data();
        // Subgradient at 0 is 0.
        for (std::size_t i = 0; i < dst.size(); ++i) {
          if (in[i] > T(0)) dst[i] += g[i];
        }
      },
      "relu");
}

template <typename T>
Var sigmoid(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.data()) v = sigmoid(v);
  const Var y = next_var(tape);
  return tape.record(
      std::move(out), edges<T>({x}),
      [x, y](Tape<T>& t, const Tensor<T>& g) {
        auto s = t.value(y).data();
        auto dst = t.grad(x).data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * s[i] * (T(1) - s[i]);
      },
      "sigmoid");
}

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor) {
  Tensor<T> out = tape.value(x);
  for (T& v : out.data()) v *= factor;
  return tape.record(
      std::move(out), edges<T>({x}),
      [x, factor](Tape<T>& t, const Tensor<T>& g) {
        auto dst = t.grad(x).data();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += factor * g[i];
      },
      "scale");
}

template <typename T>
Var concat(Tape<T>& tape, std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  const std::size_t m = tape.value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (Var p : parts) {
    const auto& v = tape.value(p);
    if (v.rows() != m) {
      throw DimensionError(describe("concat", tape.value(parts[0]).shape(), v.shape()));
    }
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor<T> out({m, total});
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto& v = tape.value(parts[p]);
    for (std::size_t r = 0; r < m; ++r) {
      std::copy_n(v.row(r).begin(), widths[p], out.row(r).begin() + offset);
    }
    offset += widths[p];
  }
  Edges<T> in;
  for (Var p : parts) in.push_back({p, false});
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(
      std::move(out), std::move(in),
      [inputs, widths, m](Tape<T>& t, const Tensor<T>& g) {
        std::size_t offset = 0;
        for (std::size_t p = 0; p < inputs.size(); ++p) {
          if (t.requires_grad(inputs[p])) {
            auto& dst = t.grad(inputs[p]);
            for (std::size_t r = 0; r < m; ++r) {
              auto grow = g.row(r).subspan(offset, widths[p]);
              auto drow = dst.row(r);
              for (std::size_t j = 0; j < widths[p]; ++j) drow[j] += grow[j];
            }
          }
          offset += widths[p];
        }
      },
      "concat");
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  T s = T(0);
  for (T v : tape.value(x).data()) s += v;
  return tape.record(
      Tensor<T>::scalar(s), edges<T>({x}),
      [x](Tape<T>& t, const Tensor<T>& g) {
        const T gs = g[0];
        for (T& d : t.grad(x).data()) d += gs;
      },
      "sum");
}

template <typename T>
Var l2_normalize(Tape<T>& tape, Var x) {
  const auto& vx = tape.value(x);
  const std::size_t m = vx.rows(), n = vx.cols();
  const T eps = static_cast<T>(kNormEpsilon);
  Tensor<T> out = vx;
  std::vector<T> norms(m);
  for (std::size_t r = 0; r < m; ++r) {
    norms[r] = guarded_norm<T>(vx.row(r));
    const T denom = std::max(norms[r], eps);
    for (T& v : out.row(r)) v /= denom;
  }
  const Var y = next_var(tape);
  return tape.record(
      std::move(out), edges<T>({x}),
      [x, y, norms, m, n, eps](Tape<T>& t, const Tensor<T>& g) {
        const auto& vy = t.value(y);
        auto& dst = t.grad(x);
        for (std::size_t r = 0; r < m; ++r) {
          auto yr = vy.row(r);
          auto gr = g.row(r);
          auto dr = dst.row(r);
          if (norms[r] > eps) {
            // d(x/|x|) = (g - y (y.g)) / |x|
            const T yg = kernels::dot<T>(yr, gr);
            for (std::size_t j = 0; j < n; ++j) dr[j] += (gr[j] - yr[j] * yg) / norms[r];
          } else {
            for (std::size_t j = 0; j < n; ++j) dr[j] += gr[j] / eps;
          }
        }
      },
      "l2_normalize");
}

template <typename T>
Var cosine_similarity(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape, a, b, "cosine_similarity");
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  const std::size_t m = va.rows(), n = va.cols();
  const T eps = static_cast<T>(kNormEpsilon);
  std::vector<T> na(m), nb(m), cos(m);
  Tensor<T> out({m, 1});
  for (std::size_t r = 0; r < m; ++r) {
    na[r] = guarded_norm<T>(va.row(r));
    nb[r] = guarded_norm<T>(vb.row(r));
    cos[r] = kernels::dot<T>(va.row(r), vb.row(r)) / (std::max(na[r], eps) * std::max(nb[r], eps));
    out[r] = cos[r];
  }
  return tape.record(
      std::move(out), edges<T>({a, b}),
      [a, b, na, nb, cos, m, n, eps](Tape<T>& t, const Tensor<T>& g) {
        const auto& va = t.value(a);
        const auto& vb = t.value(b);
        for (std::size_t r = 0; r < m; ++r) {
          const T da = std::max(na[r], eps), db = std::max(nb[r], eps);
          const T gr = g[r];
          // d/da [a.b / (|a| |b|)] = b / (|a| |b|) - cos * a / |a|^2
          if (t.requires_grad(a)) {
            auto dst = t.grad(a).row(r);
            auto ar = va.row(r);
            auto br = vb.row(r);
            const T self = na[r] > eps ? cos[r] / (na[r] * na[r]) : T(0);
            for (std::size_t j = 0; j < n; ++j) dst[j] += gr * (br[j] / (da * db) - self * ar[j]);
          }
          if (t.requires_grad(b)) {
            auto dst = t.grad(b).row(r);
            auto ar = va.row(r);
            auto br = vb.row(r);
            const T self = nb[r] > eps ? cos[r] / (nb[r] * nb[r]) : T(0);
            for (std::size_t j = 0; j < n; ++j) dst[j] += gr * (ar[j] / (da * db) - self * br[j]);
          }
        }
      },
      "cosine_similarity");
}

template <typename T>
Var row_dot(Tape<T>& tape, Var a, Var b) {
  require_same_shape(tape, a, b, "row_dot");
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  const std::size_t m = va.rows(), n = va.cols();
  Tensor<T> out({m, 1});
  for (std::size_t r = 0; r < m; ++r) out[r] = kernels::dot<T>(va.row(r), vb.row(r));
  return tape.record(
      std::move(out), edges<T>({a, b}),
      [a, b, m, n](Tape<T>& t, const Tensor<T>& g) {
        for (auto [self, other] : {std::pair{a, b}, std::pair{b, a}}) {
          if (!t.requires_grad(self)) continue;
          auto& dst = t.grad(self);
          const auto& vo = t.value(other);
          for (std::size_t r = 0; r < m; ++r) {
            auto d = dst.row(r);
            auto o = vo.row(r);
            for (std::size_t j = 0; j < n; ++j) d[j] += g[r] * o[j];
          }
        }
      },
      "row_dot");
}

namespace {

// Shared body of row_mse / row_mae: mean over columns of f(a - b).
template <typename T, typename Value, typename Slope>
Var row_distance(Tape<T>& tape, Var a, Var b, Value value, Slope slope, const char* op) {
  require_same_shape(tape, a, b, op);
  const auto& va = tape.value(a);
  const auto& vb = tape.value(b);
  const std::size_t m = va.rows(), n = va.cols();
  Tensor<T> out({m, 1});
  for (std::size_t r = 0; r < m; ++r) {
    T s = T(0);
    for (std::size_t j = 0; j < n; ++j) s += value(va(r, j) - vb(r, j));
    out[r] = s / static_cast<T>(n);
  }
  return tape.record(
      std::move(out), edges<T>({a, b}),
      [a, b, m, n, slope](Tape<T>& t, const Tensor<T>& g) {
        const auto& va = t.value(a);
        const auto& vb = t.value(b);
        const T inv = T(1) / static_cast<T>(n);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t j = 0; j < n; ++j) {
            const T d = g[r] * inv * slope(va(r, j) - vb(r, j));
            if (t.requires_grad(a)) t.grad(a)(r, j) += d;
            if (t.requires_grad(b)) t.grad(b)(r, j) -= d;
          }
        }
      },
      op);
}

}  // namespace

template <typename T>
Var row_mse(Tape<T>& tape, Var a, Var b) {
  return row_distance<T>(
      tape, a, b, [](T d) { return d * d; }, [](T d) { return T(2) * d; }, "row_mse");
}

template <typename T>
Var row_mae(Tape<T>& tape, Var a, Var b) {
  return row_distance<T>(
      tape, a, b, [](T d) { return std::abs(d); },
      [](T d) { return d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0)); }, "row_mae");
}

template <typename T>
Var weighted_sum(Tape<T>& tape, Var x, std::span<const T> weights) {
  const auto& vx = tape.value(x);
  if (vx.cols() != 1 || vx.rows() != weights.size()) {
    throw DimensionError("weighted_sum: column of " + std::to_string(vx.rows()) +
                         " rows with " + std::to_string(weights.size()) + " weights");
  }
  T s = T(0);
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * vx[i];
  std::vector<T> w(weights.begin(), weights.end());
  return tape.record(
      Tensor<T>::scalar(s), edges<T>({x}),
      [x, w](Tape<T>& t, const Tensor<T>& g) {
        auto dst = t.grad(x).data();
        for (std::size_t i = 0; i < w.size(); ++i) dst[i] += g[0] * w[i];
      },
      "weighted_sum");
}

template <typename T>
Var sigmoid_cross_entropy(Tape<T>& tape, Var logits, std::span<const T> labels) {
  const auto& vx = tape.value(logits);
  if (vx.cols() != 1 || vx.rows() != labels.size()) {
    throw DimensionError("sigmoid_cross_entropy: " + std::to_string(vx.rows()) +
                         " logits for " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t m = labels.size();
  T total = T(0);
  for (std::size_t i = 0; i < m; ++i) {
    const T x = vx[i];
    // -[y log s(x) + (1-y) log(1-s(x))] = max(x,0) - x y + log(1 + exp(-|x|))
    total += std::max(x, T(0)) - x * labels[i] + std::log1p(std::exp(-std::abs(x)));
  }
  std::vector<T> y(labels.begin(), labels.end());
  return tape.record(
      Tensor<T>::scalar(total / static_cast<T>(m)), edges<T>({logits}),
      [logits, y, m](Tape<T>& t, const Tensor<T>& g) {
        const auto& vx = t.value(logits);
        auto dst = t.grad(logits).data();
        const T scale = g[0] / static_cast<T>(m);
        for (std::size_t i = 0; i < m; ++i) dst[i] += scale * (sigmoid(vx[i]) - y[i]);
      },
      "sigmoid_cross_entropy");
}

template <typename T>
Var max_then_sum(Tape<T>& tape, Var user_heads, Var ad_heads, std::size_t heads,
                 std::size_t head_dim) {
  require_same_shape(tape, user_heads, ad_heads, "max_then_sum");
  const auto& vu = tape.value(user_heads);
  const auto& va = tape.value(ad_heads);
  if (heads == 0 || head_dim == 0 || vu.cols() != heads * head_dim) {
    throw DimensionError("max_then_sum: row width " + std::to_string(vu.cols()) +
                         " is not heads*head_dim = " + std::to_string(heads) + "*" +
                         std::to_string(head_dim));
  }
  const std::size_t m = vu.rows();
  Tensor<T> out({m, 1});
  std::vector<std::size_t> winners(m * heads);
  for (std::size_t r = 0; r < m; ++r) {
    out[r] = kernels::max_then_sum<T>(vu.row(r), va.row(r), heads, head_dim,
                                      std::span<std::size_t>(winners).subspan(r * heads, heads));
  }
  return tape.record(
      std::move(out), edges<T>({user_heads, ad_heads}),
      [user_heads, ad_heads, winners, m, heads, head_dim](Tape<T>& t, const Tensor<T>& g) {
        const auto& vu = t.value(user_heads);
        const auto& va = t.value(ad_heads);
        const bool gu = t.requires_grad(user_heads), ga = t.requires_grad(ad_heads);
        for (std::size_t r = 0; r < m; ++r) {
          for (std::size_t ju = 0; ju < heads; ++ju) {
            const std::size_t ja = winners[r * heads + ju];
            const std::size_t uo = ju * head_dim, ao = ja * head_dim;
            for (std::size_t k = 0; k < head_dim; ++k) {
              if (gu) t.grad(user_heads)(r, uo + k) += g[r] * va(r, ao + k);
              if (ga) t.grad(ad_heads)(r, ao + k) += g[r] * vu(r, uo + k);
            }
          }
        }
      },
      "max_then_sum");
}

template <typename T>
Var gather_rows(Tape<T>& tape, Var table, std::span<const std::uint32_t> indices) {
  const auto& vt = tape.value(table);
  const std::size_t d = vt.cols();
  if (indices.empty()) throw ContractError("gather_rows with no indices");
  Tensor<T> out({indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= vt.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[r]) +
                           " outside table of " + std::to_string(vt.rows()) + " rows");
    }
    std::copy_n(vt.row(indices[r]).begin(), d, out.row(r).begin());
  }
  std::vector<std::uint32_t> idx(indices.begin(), indices.end());
  return tape.record(
      std::move(out), edges<T>({table}),
      [table, idx, d](Tape<T>& t, const Tensor<T>& g) {
        auto& dst = t.grad(table);
        for (std::size_t r = 0; r < idx.size(); ++r) {
          auto drow = dst.row(idx[r]);
          auto grow = g.row(r);
          for (std::size_t j = 0; j < d; ++j) drow[j] += grow[j];
        }
      },
      "gather_rows");
}

template <typename T>
Var stop_gradient(Tape<T>& tape, Var x) {
  return tape.record(tape.stop_gradient_value(tape.value(x)), {{x, true}}, nullptr, "stop_gradient");
}

#define HIT_INSTANTIATE_OPS(T)                                                          \
  template T sigmoid<T>(T);                                                              \
  template Var matmul<T>(Tape<T>&, Var, Var);                                            \
  template Var add<T>(Tape<T>&, Var, Var);                                               \
  template Var add_bias<T>(Tape<T>&, Var, Var);                                          \
  template Var relu<T>(Tape<T>&, Var);                                                   \
  template Var sigmoid<T>(Tape<T>&, Var);                                                \
  template Var scale<T>(Tape<T>&, Var, T);                                               \
  template Var concat<T>(Tape<T>&, std::span<const Var>);                                \
  template Var sum<T>(Tape<T>&, Var);                                                    \
  template Var l2_normalize<T>(Tape<T>&, Var);                                           \
  template Var cosine_similarity<T>(Tape<T>&, Var, Var);                                 \
  template Var row_dot<T>(Tape<T>&, Var, Var);                                           \
  template Var row_mse<T>(Tape<T>&, Var, Var);                                           \
  template Var row_mae<T>(Tape<T>&, Var, Var);                                           \
  template Var weighted_sum<T>(Tape<T>&, Var, std::span<const T>);                       \
  template Var sigmoid_cross_entropy<T>(Tape<T>&, Var, std::span<const T>);              \
  template Var max_then_sum<T>(Tape<T>&, Var, Var, std::size_t, std::size_t);            \
  template Var gather_rows<T>(Tape<T>&, Var, std::span<const std::uint32_t>);            \
  template Var stop_gradient<T>(Tape<T>&, Var);

HIT_INSTANTIATE_OPS(float)
HIT_INSTANTIATE_OPS(double)

#undef HIT_INSTANTIATE_OPS

}  // namespace hit::ops
