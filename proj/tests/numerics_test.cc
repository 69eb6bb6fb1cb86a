#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "hit/error.h"
#include "hit/numerics/grad_check.h"
#include "hit/numerics/kernels.h"
#include "hit/numerics/ops.h"
#include "test_support.h"

using hit::Tape;
using hit::Tensor;
using hit::Shape;
using hit::Var;
namespace ops = hit::ops;
using hit::testing::central_difference;
using hit::testing::max_relative_error;
using hit::testing::random_tensor;

namespace {

// Gradient of sum(weights * g(x)) w.r.t. x through the tape, where g is a
// unary tape function. Random output weights keep the check from collapsing
// onto a degenerate direction.
template <typename Fn>
Tensor<double> tape_gradient(Fn g, const Tensor<double>& x, const Tensor<double>& weights) {
  Tape<double> tape;
  Var vx = tape.parameter(x, 0);
  Var y = g(tape, vx);
  Var w = tape.constant(weights);
  Var loss = ops::sum(tape, ops::row_dot(tape, y, w));
  return tape.backward(loss, 1)[0];
}

template <typename Fn>
double tape_value(Fn g, const Tensor<double>& x, const Tensor<double>& weights) {
  Tape<double> tape;
  Var vx = tape.constant(x);
  Var y = g(tape, vx);
  Var w = tape.constant(weights);
  return tape.value(ops::sum(tape, ops::row_dot(tape, y, w))).item();
}

template <typename Fn>
double fd_mismatch(Fn g, const Tensor<double>& x, const Shape& out_shape, std::uint64_t seed) {
  const auto weights = random_tensor(out_shape, seed + 1);
  const auto analytic = tape_gradient(g, x, weights);
  const auto numeric =
      central_difference([&](const Tensor<double>& p) { return tape_value(g, p, weights); }, x);
  return max_relative_error(analytic, numeric);
}

}  // namespace

TEST_CASE("tensor rejects inconsistent shapes") {
  CHECK_THROWS_AS(Tensor<float>({2, 3}, std::vector<float>(5)), hit::DimensionError);
  CHECK_THROWS_AS(Tensor<float>({0, 3}), hit::DimensionError);
  Tensor<float> v = Tensor<float>::vector({1, 2, 3});
  CHECK(v.rows() == 1);
  CHECK(v.cols() == 3);
}

TEST_CASE("matmul") {
  Tape<double> tape;
  SUBCASE("identity on the left returns the operand") {
    auto m = random_tensor({2, 2}, 3);
    Var eye = tape.constant(Tensor<double>::from_rows({{1, 0}, {0, 1}}));
    CHECK(tape.value(ops::matmul(tape, eye, tape.constant(m))) == m);
  }
  SUBCASE("worked 2x2 times 2x1") {
    Var a = tape.constant(Tensor<double>::from_rows({{1, 2}, {3, 4}}));
    Var b = tape.constant(Tensor<double>::from_rows({{1}, {1}}));
    CHECK(tape.value(ops::matmul(tape, a, b)) == Tensor<double>::from_rows({{3}, {7}}));
  }
  SUBCASE("float product agrees with a 64-bit triple loop") {
    auto a64 = random_tensor({3, 4}, 11);
    auto b64 = random_tensor({4, 2}, 12);
    Tape<float> ft;
    const auto& c = ft.value(ops::matmul(ft, ft.constant(a64.cast<float>()),
                                         ft.constant(b64.cast<float>())));
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 2; ++j) {
        double expect = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
          expect += static_cast<double>(static_cast<float>(a64(i, k))) *
                    static_cast<double>(static_cast<float>(b64(k, j)));
        }
        CHECK(std::abs(c(i, j) - expect) <= 1e-6 * std::max(1.0, std::abs(expect)));
      }
    }
  }
  SUBCASE("inner dimension mismatch") {
    Var a = tape.constant(Tensor<double>({2, 3}));
    Var b = tape.constant(Tensor<double>({2, 3}));
    CHECK_THROWS_AS(ops::matmul(tape, a, b), hit::DimensionError);
  }
  SUBCASE("gradients to both operands match finite differences") {
    auto a = random_tensor({3, 4}, 21);
    auto b = random_tensor({4, 2}, 22);
    auto wrt_a = [&](Tape<double>& t, Var x) { return ops::matmul(t, x, t.constant(b)); };
    auto wrt_b = [&](Tape<double>& t, Var x) { return ops::matmul(t, t.constant(a), x); };
    CHECK(fd_mismatch(wrt_a, a, {3, 2}, 5) < 1e-6);
    CHECK(fd_mismatch(wrt_b, b, {3, 2}, 6) < 1e-6);
  }
}

TEST_CASE("gemm rows are independent of batch composition") {
  auto a = random_tensor<float>({7, 13}, 31);
  auto b = random_tensor<float>({13, 9}, 32);
  Tensor<float> batch({7, 9});
  hit::kernels::gemm<float>(a.data(), b.data(), batch.data(), 7, 13, 9, false);
  for (std::size_t r = 0; r < 7; ++r) {
    Tensor<float> single({1, 9});
    hit::kernels::gemm<float>(a.row(r), b.data(), single.data(), 1, 13, 9, false);
    CHECK(std::memcmp(single.data().data(), batch.row(r).data(), 9 * sizeof(float)) == 0);
  }
}

TEST_CASE("relu") {
  Tape<double> tape;
  Var x = tape.parameter(Tensor<double>::vector({-1, 0, 2}), 0);
  Var y = ops::relu(tape, x);
  CHECK(tape.value(y) == Tensor<double>::vector({0, 0, 2}));
  auto g = tape.backward(ops::sum(tape, y), 1)[0];
  // Subgradient at exactly 0 is 0.
  CHECK(g == Tensor<double>::vector({0, 0, 1}));

  SUBCASE("all-negative input has zero output and zero gradient") {
    Tape<double> t2;
    Var n = t2.parameter(Tensor<double>::vector({-3, -0.5, -7}), 0);
    Var out = ops::relu(t2, n);
    CHECK(t2.value(out) == Tensor<double>::vector({0, 0, 0}));
    CHECK(t2.backward(ops::sum(t2, out), 1)[0] == Tensor<double>::vector({0, 0, 0}));
  }
  SUBCASE("gradient away from the kink matches finite differences") {
    auto v = random_tensor({4, 5}, 41);
    for (double& e : v.data()) {
      if (std::abs(e) < 1e-3) e = 0.5;
    }
    CHECK(fd_mismatch([](Tape<double>& t, Var in) { return ops::relu(t, in); }, v, {4, 5}, 7) <
          1e-4);
  }
}

TEST_CASE("l2_normalize") {
  Tape<double> tape;
  CHECK(max_relative_error(tape.value(ops::l2_normalize(tape, tape.constant(
                               Tensor<double>::vector({3, 4})))),
                           Tensor<double>::vector({0.6, 0.8})) < 1e-15);
  auto unit = Tensor<double>::vector({0, 1, 0});
  CHECK(tape.value(ops::l2_normalize(tape, tape.constant(unit))) == unit);
  // Zero rows stay zero.
  auto zero = Tensor<double>::vector({0, 0, 0});
  CHECK(tape.value(ops::l2_normalize(tape, tape.constant(zero))) == zero);

  auto v = random_tensor({3, 6}, 51);
  CHECK(fd_mismatch([](Tape<double>& t, Var in) { return ops::l2_normalize(t, in); }, v, {3, 6},
                    8) < 1e-4);
}

TEST_CASE("sigmoid") {
  CHECK(ops::sigmoid(0.0) == 0.5);
  CHECK(ops::sigmoid(0.0f) == 0.5f);
  hit::Rng rng(61);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.uniform(-30, 30);
    CHECK(std::abs(ops::sigmoid(x) + ops::sigmoid(-x) - 1.0) < 1e-15);
  }
  // 1 / (1 + e^100) from a 40-digit evaluation.
  const double tiny = ops::sigmoid(-100.0);
  CHECK(tiny > 0.0);
  CHECK(tiny <= 1e-40);
  CHECK(std::abs(tiny - 3.720075976020836e-44) / 3.720075976020836e-44 < 1e-12);
  const float tiny_f = ops::sigmoid(-100.0f);
  CHECK(tiny_f > 0.0f);
  CHECK(tiny_f <= 1e-40f);
  CHECK_FALSE(std::isnan(ops::sigmoid(-1e6f)));

  auto v = random_tensor({2, 3}, 62, -4, 4);
  CHECK(fd_mismatch([](Tape<double>& t, Var in) { return ops::sigmoid(t, in); }, v, {2, 3}, 9) <
        1e-6);
}

TEST_CASE("cosine_similarity") {
  Tape<double> tape;
  auto cos = [&](Tensor<double> a, Tensor<double> b) {
    return tape.value(ops::cosine_similarity(tape, tape.constant(a), tape.constant(b))).item();
  };
  auto v = random_tensor({1, 5}, 71);
  Tensor<double> neg = v;
  for (double& e : neg.data()) e = -e;
  CHECK(cos(v, v) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(cos(Tensor<double>::vector({1, 0}), Tensor<double>::vector({0, 1})) == 0.0);
  CHECK(cos(v, neg) == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK_THROWS_AS(ops::cosine_similarity(tape, tape.constant(Tensor<double>::vector({1, 2})),
                                         tape.constant(Tensor<double>::vector({1, 2, 3}))),
                  hit::DimensionError);

  SUBCASE("scale invariance") {
    hit::Rng rng(72);
    for (int i = 0; i < 50; ++i) {
      auto a = random_tensor({1, 8}, 100 + i);
      auto b = random_tensor({1, 8}, 200 + i);
      const double alpha = rng.uniform(0.01, 100), beta = rng.uniform(0.01, 100);
      Tensor<double> sa = a, sb = b;
      for (double& e : sa.data()) e *= alpha;
      for (double& e : sb.data()) e *= beta;
      CHECK(std::abs(cos(sa, sb) - cos(a, b)) < 1e-6);
      const double c = cos(a, b);
      CHECK(c <= 1.0);
      CHECK(c >= -1.0);
    }
  }
  SUBCASE("gradients w.r.t. both inputs") {
    auto a = random_tensor({3, 4}, 73);
    auto b = random_tensor({3, 4}, 74);
    auto wrt_a = [&](Tape<double>& t, Var x) { return ops::cosine_similarity(t, x, t.constant(b)); };
    auto wrt_b = [&](Tape<double>& t, Var x) { return ops::cosine_similarity(t, t.constant(a), x); };
    CHECK(fd_mismatch(wrt_a, a, {3, 1}, 10) < 1e-4);
    CHECK(fd_mismatch(wrt_b, b, {3, 1}, 11) < 1e-4);
  }
}

TEST_CASE("stop_gradient") {
  auto x = random_tensor({2, 3}, 81);
  SUBCASE("value transparent") {
    Tape<double> tape;
    Var v = tape.parameter(x, 0);
    Var s = ops::stop_gradient(tape, v);
    CHECK(std::memcmp(tape.value(s).data().data(), x.data().data(), x.size() * sizeof(double)) ==
          0);
    CHECK(tape.inputs(s).at(0).stop_gradient);
  }
  SUBCASE("gradient opaque") {
    Tape<double> tape;
    Var v = tape.parameter(x, 0);
    auto g = tape.backward(ops::sum(tape, ops::stop_gradient(tape, v)), 1)[0];
    CHECK(g == Tensor<double>(x.shape(), 0.0));
  }
  SUBCASE("sum rule with a detached copy") {
    Tape<double> tape;
    Var v = tape.parameter(x, 0);
    Var y = ops::add(tape, v, ops::stop_gradient(tape, v));
    auto g = tape.backward(ops::sum(tape, y), 1)[0];
    CHECK(g == Tensor<double>(x.shape(), 1.0));
  }
}

TEST_CASE("backward") {
  auto w = random_tensor({3, 4}, 91);
  auto x = random_tensor({4, 1}, 92);

  SUBCASE("sum(W x) has outer-product gradient") {
    Tape<double> tape;
    Var vw = tape.parameter(w, 0);
    auto g = tape.backward(ops::sum(tape, ops::matmul(tape, vw, tape.constant(x))), 1)[0];
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 4; ++j) CHECK(g(i, j) == doctest::Approx(x[j]));
    }
    auto numeric = central_difference(
        [&](const Tensor<double>& p) {
          Tape<double> t;
          return t.value(ops::sum(t, ops::matmul(t, t.constant(p), t.constant(x)))).item();
        },
        w);
    CHECK(max_relative_error(g, numeric) < 1e-4);
  }
  SUBCASE("parameter behind stop_gradient gets exactly zero") {
    Tape<double> tape;
    Var vw = tape.parameter(w, 0);
    Var vx = tape.parameter(x, 1);
    Var y = ops::matmul(tape, ops::stop_gradient(tape, vw), vx);
    auto grads = tape.backward(ops::sum(tape, y), 2);
    CHECK(grads[0] == Tensor<double>(w.shape(), 0.0));
    CHECK(grads[1] != Tensor<double>(x.shape(), 0.0));
  }
  SUBCASE("two uses of a parameter accumulate") {
    auto f = [](Tape<double>& t, Var p) {
      Var h = ops::relu(t, ops::matmul(t, p, t.constant(Tensor<double>::from_rows(
                                                 {{0.5}, {-1.0}, {2.0}, {0.25}}))));
      return ops::add(t, h, ops::scale(t, ops::matmul(t, p, t.constant(Tensor<double>(
                                                                 {4, 1}, 1.0))), 3.0));
    };
    CHECK(fd_mismatch(f, w, {3, 1}, 12) < 1e-4);
  }
  SUBCASE("unreached parameter gets exact zeros, unregistered gets empty") {
    Tape<double> tape;
    Var vw = tape.parameter(w, 0);
    tape.parameter(x, 1);
    auto grads = tape.backward(ops::sum(tape, vw), 3);
    CHECK(grads[1] == Tensor<double>(x.shape(), 0.0));
    CHECK(grads[2].empty());
  }
  SUBCASE("non-scalar loss is a contract error") {
    Tape<double> tape;
    Var vw = tape.parameter(w, 0);
    CHECK_THROWS_AS(tape.backward(vw, 1), hit::ContractError);
  }
}

TEST_CASE("remaining primitives match finite differences") {
  SUBCASE("add_bias") {
    auto x = random_tensor({3, 4}, 101);
    auto b = random_tensor({1, 4}, 102);
    CHECK(fd_mismatch([&](Tape<double>& t, Var v) { return ops::add_bias(t, t.constant(x), v); },
                      b, {3, 4}, 13) < 1e-6);
  }
  SUBCASE("concat") {
    auto a = random_tensor({2, 3}, 103);
    auto b = random_tensor({2, 2}, 104);
    auto f = [&](Tape<double>& t, Var v) {
      std::vector<Var> parts{t.constant(a), v, t.constant(a)};
      return ops::concat(t, std::span<const Var>(parts));
    };
    CHECK(fd_mismatch(f, b, {2, 8}, 14) < 1e-6);
  }
  SUBCASE("row_mse and row_mae") {
    auto a = random_tensor({3, 5}, 105);
    auto b = random_tensor({3, 5}, 106);
    CHECK(fd_mismatch([&](Tape<double>& t, Var v) { return ops::row_mse(t, v, t.constant(b)); }, a,
                      {3, 1}, 15) < 1e-6);
    CHECK(fd_mismatch([&](Tape<double>& t, Var v) { return ops::row_mae(t, t.constant(a), v); }, b,
                      {3, 1}, 16) < 1e-6);
  }
  SUBCASE("sigmoid_cross_entropy") {
    auto logits = random_tensor({6, 1}, 107, -5, 5);
    std::vector<double> labels{1, 0, 0, 1, 1, 0};
    auto f = [&](Tape<double>& t, Var v) {
      Var l = ops::sigmoid_cross_entropy(t, v, std::span<const double>(labels));
      return l;
    };
    CHECK(fd_mismatch(f, logits, {1, 1}, 17) < 1e-6);
  }
  SUBCASE("max_then_sum") {
    auto u = random_tensor({4, 6}, 108);
    auto a = random_tensor({4, 6}, 109);
    CHECK(fd_mismatch([&](Tape<double>& t, Var v) { return ops::max_then_sum(t, v, t.constant(a), 3, 2); },
                      u, {4, 1}, 18) < 1e-6);
    CHECK(fd_mismatch([&](Tape<double>& t, Var v) { return ops::max_then_sum(t, t.constant(u), v, 3, 2); },
                      a, {4, 1}, 19) < 1e-6);
  }
  SUBCASE("gather_rows scatters into looked-up rows only") {
    auto table = random_tensor({5, 3}, 110);
    std::vector<std::uint32_t> idx{4, 1, 4};
    Tape<double> tape;
    Var vt = tape.parameter(table, 0);
    Var rows = ops::gather_rows(tape, vt, std::span<const std::uint32_t>(idx));
    CHECK(tape.value(rows).row(0)[2] == table(4, 2));
    auto g = tape.backward(ops::sum(tape, rows), 1)[0];
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(g(4, j) == 2.0);
      CHECK(g(1, j) == 1.0);
      CHECK(g(0, j) == 0.0);
    }
  }
}

TEST_CASE("forward primitives reject non-finite values") {
  Tape<float> tape;
  Var big = tape.constant(Tensor<float>::vector({3e38f}));
  CHECK_THROWS_AS(ops::scale(tape, big, 10.0f), hit::NumericError);
}

TEST_CASE("primitives are deterministic") {
  auto run = [] {
    Tape<float> tape;
    Var a = tape.constant(random_tensor<float>({16, 12}, 121));
    Var b = tape.constant(random_tensor<float>({12, 8}, 122));
    Var h = ops::l2_normalize(tape, ops::relu(tape, ops::matmul(tape, a, b)));
    return tape.value(ops::max_then_sum(tape, h, h, 2, 4));
  };
  auto first = run();
  auto second = run();
  CHECK(std::memcmp(first.data().data(), second.data().data(), first.size() * sizeof(float)) == 0);
}

TEST_CASE("grad_check") {
  hit::ParameterSet<double> params;
  params.add("w", random_tensor({3, 4}, 131));
  auto quadratic = [](Tape<double>& t, std::span<const Var> p) {
    return ops::sum(t, ops::row_dot(t, p[0], p[0]));
  };

  SUBCASE("quadratic is exact") {
    auto report = hit::grad_check(quadratic, params, 1e-9);
    CHECK(report.valid);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-9);
    CHECK(report.params.at(0).checked == 12);
  }
  SUBCASE("corrupted gradient fails") {
    auto analytic = hit::analytic_gradients(quadratic, params);
    for (double& g : analytic[0].data()) g *= 1.1;
    auto report = hit::compare_gradients(quadratic, params, analytic, 1e-4);
    CHECK_FALSE(report.passed);
    CHECK(report.max_rel_error > 0.05);
  }
  SUBCASE("non-deterministic function is reported invalid") {
    int calls = 0;
    auto drifting = [&](Tape<double>& t, std::span<const Var> p) {
      return ops::scale(t, ops::sum(t, p[0]), 1.0 + 1e-3 * ++calls);
    };
    auto report = hit::grad_check(drifting, params, 1e-4);
    CHECK_FALSE(report.valid);
    CHECK_FALSE(report.passed);
  }
  SUBCASE("large parameters are subsampled") {
    hit::ParameterSet<double> big;
    big.add("v", random_tensor({1, 50}, 132));
    hit::GradCheckOptions options;
    options.max_elements_per_param = 10;
    auto report = hit::grad_check(quadratic, big, 1e-9, options);
    CHECK(report.params.at(0).checked == 10);
    CHECK(report.passed);
  }
}
