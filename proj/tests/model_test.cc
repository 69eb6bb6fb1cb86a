#include <cmath>
#include <cstring>

#include "doctest.h"
#include "hit/error.h"
#include "hit/model/checkpoint.h"
#include "hit/model/encoder.h"
#include "hit/model/forward.h"
#include "hit/numerics/kernels.h"
#include "hit/numerics/ops.h"
#include "model_fixtures.h"
#include "test_support.h"

using namespace hit;
using hit::testing::full_loss;
using hit::testing::labels_as;
using hit::testing::random_dataset;
using hit::testing::toy_config;
using hit::testing::toy_schema;

namespace {

bool is_generator(const std::string& name) { return name.find(".gen.") != std::string::npos; }
bool is_target_generator(const std::string& name) {
  return name.find(".gen.target.") != std::string::npos;
}
bool is_non_target_generator(const std::string& name) {
  return name.find(".gen.non_target.") != std::string::npos;
}

bool all_zero(const Tensor<float>& t) {
  for (float v : t.data()) {
    if (v != 0.0f) return false;
  }
  return true;
}

enum class LossPart { kCrossEntropy, kGeneration, kTotal };

std::vector<Tensor<float>> gradients(const HitModel& model, const EncodedBatch& batch, LossPart part) {
  Tape<float> tape;
  const auto vars = tape.parameters(model.params());
  const auto labels = labels_as<float>(batch);
  const auto trace = forward(tape, model.config(), model.layout(), std::span<const Var>(vars), batch);
  const auto losses = compute_losses(tape, model.config(), trace, std::span<const float>(labels));
  Var loss = losses.total;
  if (part == LossPart::kCrossEntropy) loss = losses.cross_entropy;
  if (part == LossPart::kGeneration) loss = ops::add(tape, *losses.generation_user, *losses.generation_ad);
  return tape.backward(loss, model.params().size());
}

// x[m x k] * w[k x n] + b, in 64-bit.
std::vector<double> affine(const std::vector<double>& x, const Tensor<float>& w, const Tensor<float>& b) {
  const std::size_t k = w.rows(), n = w.cols();
  std::vector<double> out(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = b[j];
    for (std::size_t i = 0; i < k; ++i) s += x[i] * w(i, j);
    out[j] = s;
  }
  return out;
}

}  // namespace

TEST_CASE("parameter layout follows the config") {
  const auto schema = toy_schema();
  HitConfig config = toy_config();
  const auto model = HitModel::initialize(config, schema, 1);
  const auto& user = model.layout().user;
  CHECK(user.static_tables.size() == 2);
  CHECK(user.dynamic_tables.size() == 1);
  CHECK(user.generator_input_width == 8);
  // 3 fields * d + K * p
  CHECK(user.input_width == 3 * 4 + 2 * 6);
  CHECK(model.params().value(user.layers[0].weight).shape() == Shape{24, 8});
  CHECK(model.params().value(user.heads[1].weight).shape() == Shape{4, 3});
  CHECK(model.params().value(user.generators[1]->output.weight).shape() == Shape{5, 6});
  CHECK(model.heads() == 2);
  CHECK(model.head_dim() == 3);

  SUBCASE("initialization is seeded") {
    CHECK(HitModel::initialize(config, schema, 1).params() == model.params());
    CHECK_FALSE(HitModel::initialize(config, schema, 2).params() == model.params());
  }
  SUBCASE("biases start at zero, weights inside the Glorot bound") {
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      const auto& name = model.params().name(i);
      const auto& v = model.params().value(i);
      if (name.ends_with(".bias")) CHECK(all_zero(v));
      if (name.ends_with(".weight")) {
        const double limit = std::sqrt(6.0 / double(v.rows() + v.cols()));
        for (float x : v.data()) CHECK(std::abs(x) <= limit);
      }
    }
  }
  SUBCASE("K=1 keeps only the target generator") {
    config.num_generators = 1;
    const auto m = HitModel::initialize(config, schema, 1);
    CHECK(m.layout().ad.generators[0].has_value());
    CHECK_FALSE(m.layout().ad.generators[1].has_value());
    CHECK(m.layout().ad.input_width == 3 * 4 + 6);
  }
  SUBCASE("without representers the heads vanish and mimics are d_L wide") {
    config.use_representers = false;
    const auto m = HitModel::initialize(config, schema, 1);
    CHECK(m.layout().user.heads.empty());
    CHECK(m.layout().user.input_width == 3 * 4 + 2 * 4);
    CHECK(m.heads() == 1);
    CHECK(m.head_dim() == 4);
  }
  SUBCASE("a wrongly shaped tensor is rejected") {
    auto params = model.params();
    params.value(params.index("ad.tower.1.bias")) = Tensor<float>({1, 5});
    CHECK_THROWS_AS(HitModel(config, schema, params), DimensionError);
  }
}

TEST_CASE("default widths") {
  // d=32 with 3 user-static + 1 user-dynamic fields
  FeatureSchema schema({{"g", FeatureBlock::kUserStatic, 2},
                        {"age", FeatureBlock::kUserStatic, 7},
                        {"occ", FeatureBlock::kUserStatic, 21},
                        {"act", FeatureBlock::kUserDynamic, 10},
                        {"genre", FeatureBlock::kAdStatic, 19},
                        {"year", FeatureBlock::kAdStatic, 8},
                        {"pop", FeatureBlock::kAdDynamic, 10}});
  const HitConfig config;
  const auto model = HitModel::initialize(config, schema, 3);
  const auto ds = random_dataset(schema, 3, 5);
  const auto batch = encode(ds);
  Tape<float> tape;
  const auto vars = tape.constants(model.params());
  const auto trace = forward(tape, config, model.layout(), std::span<const Var>(vars), batch);
  CHECK(tape.value(trace.user.embedding).shape() == Shape{3, 128});
  CHECK(tape.value(*trace.user.mimics[0]).shape() == Shape{3, 32});
  CHECK(tape.value(trace.user.hidden).shape() == Shape{3, 32});
  CHECK(tape.value(trace.user.representation).shape() == Shape{3, 32});
  CHECK(tape.value(trace.scores).shape() == Shape{3, 1});

  SUBCASE("K=2, p=32, |e_u|=160 fuses to 224") {
    Tape<float> t;
    Var e = t.constant(Tensor<float>({1, 160}, 0.5f));
    Var m1 = t.constant(Tensor<float>({1, 32}, 0.1f));
    Var m2 = t.constant(Tensor<float>({1, 32}, 0.2f));
    const Var mimics[] = {m1, m2};
    Var fused = fuse(t, e, std::span<const Var>(mimics));
    CHECK(t.value(fused).shape() == Shape{1, 224});
    CHECK(t.value(fused)(0, 0) == 0.1f);
    CHECK(t.value(fused)(0, 32) == 0.2f);
    CHECK(t.value(fused)(0, 64) == 0.5f);
  }
}

TEST_CASE("forward pieces against independent oracles") {
  const auto schema = toy_schema();
  const HitConfig config = toy_config();
  const auto model = HitModel::initialize(config, schema, 11);
  const auto& params = model.params();
  const auto ds = random_dataset(schema, 5, 12);
  const auto batch = encode(ds);
  Tape<float> tape;
  const auto vars = tape.constants(params);
  const auto trace = forward(tape, config, model.layout(), std::span<const Var>(vars), batch);
  const auto& user = model.layout().user;

  SUBCASE("embedding rows are the looked-up table rows") {
    const auto& e = tape.value(trace.user.embedding);
    for (std::size_t r = 0; r < 5; ++r) {
      for (std::size_t f = 0; f < 3; ++f) {
        const std::size_t table = f < 2 ? user.static_tables[f] : user.dynamic_tables[0];
        const auto row = params.value(table).row(ds.samples[r].ids[f]);
        for (std::size_t k = 0; k < 4; ++k) CHECK(e(r, f * 4 + k) == row[k]);
      }
    }
  }

  SUBCASE("mimic vectors are unit length") {
    for (const auto& m : {*trace.user.mimics[0], *trace.user.mimics[1], *trace.ad.mimics[0]}) {
      const auto& v = tape.value(m);
      for (std::size_t r = 0; r < v.rows(); ++r) {
        double s = 0;
        for (float x : v.row(r)) s += double(x) * x;
        CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-5));
      }
    }
  }

  SUBCASE("tower matches a layer-by-layer loop") {
    const auto& fused = tape.value(trace.user.fused);
    const auto& hidden = tape.value(trace.user.hidden);
    for (std::size_t r = 0; r < 5; ++r) {
      std::vector<double> x(fused.row(r).begin(), fused.row(r).end());
      for (const auto& layer : user.layers) {
        x = affine(x, params.value(layer.weight), params.value(layer.bias));
        for (double& v : x) v = std::max(v, 0.0);
      }
      double norm = 0;
      for (double v : x) norm += v * v;
      norm = std::max(std::sqrt(norm), 1e-12);
      double unit = 0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        CHECK(hidden(r, j) == doctest::Approx(x[j] / norm).epsilon(1e-6));
        unit += double(hidden(r, j)) * hidden(r, j);
      }
      if (norm > 1e-12) CHECK(std::sqrt(unit) == doctest::Approx(1.0).epsilon(1e-5));
    }
  }

  SUBCASE("each head is an affine map of h") {
    const auto& hidden = tape.value(trace.user.hidden);
    const auto& rep = tape.value(trace.user.representation);
    for (std::size_t r = 0; r < 5; ++r) {
      std::vector<double> h(hidden.row(r).begin(), hidden.row(r).end());
      for (std::size_t j = 0; j < 2; ++j) {
        const auto expect = affine(h, params.value(user.heads[j].weight), params.value(user.heads[j].bias));
        for (std::size_t k = 0; k < 3; ++k) {
          CHECK(rep(r, j * 3 + k) == doctest::Approx(expect[k]).epsilon(1e-6));
        }
      }
    }
  }

  SUBCASE("scores are max-then-sum of the two representations") {
    const auto& ru = tape.value(trace.user.representation);
    const auto& ra = tape.value(trace.ad.representation);
    for (std::size_t r = 0; r < 5; ++r) {
      double total = 0;
      for (std::size_t ju = 0; ju < 2; ++ju) {
        double best = -1e300;
        for (std::size_t ja = 0; ja < 2; ++ja) {
          double s = 0;
          for (std::size_t k = 0; k < 3; ++k) s += double(ru(r, ju * 3 + k)) * ra(r, ja * 3 + k);
          best = std::max(best, s);
        }
        total += best;
      }
      CHECK(tape.value(trace.scores)[r] == doctest::Approx(total).epsilon(1e-6));
    }
  }

  SUBCASE("rows do not influence each other") {
    EncodedBatch single = encode(ds, std::vector<std::size_t>{3});
    CHECK(predict(model, single)[0] == tape.value(trace.scores)[3]);
  }
}

TEST_CASE("zero weights take the degenerate path") {
  const auto schema = toy_schema();
  const HitConfig config = toy_config();
  auto params = init_parameters(config, schema, 4);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.name(i);
    if (name.find(".tower.") != std::string::npos || name.find(".head.") != std::string::npos) {
      params.value(i) = Tensor<float>(params.value(i).shape(), 0.0f);
    }
  }
  const HitModel model(config, schema, params);
  const auto batch = encode(random_dataset(schema, 3, 4));
  Tape<float> tape;
  const auto vars = tape.constants(model.params());
  const auto trace = forward(tape, config, model.layout(), std::span<const Var>(vars), batch);
  CHECK(all_zero(tape.value(trace.user.hidden)));
  CHECK(all_zero(tape.value(trace.ad.representation)));
  CHECK(all_zero(tape.value(trace.scores)));
}

TEST_CASE("tower rejects a wrong input width") {
  const auto model = HitModel::initialize(toy_config(), toy_schema(), 1);
  Tape<float> tape;
  const auto vars = tape.constants(model.params());
  Var x = tape.constant(Tensor<float>({2, 7}, 1.0f));
  CHECK_THROWS_AS(tower_forward(tape, std::span<const Var>(vars), model.layout().user, x), DimensionError);
}

TEST_CASE("scoring") {
  Tape<double> tape;
  SUBCASE("J=2, z=1 worked example") {
    Var ru = tape.constant(Tensor<double>({1, 2}, {2, -1}));
    Var ra = tape.constant(Tensor<double>({1, 2}, {3, 1}));
    CHECK(tape.value(score_max_then_sum(tape, ru, ra, 2, 1)).item() == 5.0);
  }
  SUBCASE("J=1 is the plain dot product") {
    auto a = hit::testing::random_tensor({1, 7}, 1);
    auto b = hit::testing::random_tensor({1, 7}, 2);
    Var ra = tape.constant(a), rb = tape.constant(b);
    CHECK(tape.value(score_max_then_sum(tape, ra, rb, 1, 7)).item() ==
          tape.value(vanilla_score(tape, ra, rb)).item());
  }
  SUBCASE("vanilla score on unit vectors") {
    Var a = tape.constant(Tensor<double>({1, 2}, {1, 0}));
    Var b = tape.constant(Tensor<double>({1, 2}, {0, 1}));
    CHECK(tape.value(vanilla_score(tape, a, b)).item() == 0.0);
    CHECK(tape.value(vanilla_score(tape, a, a)).item() == 1.0);
  }
  SUBCASE("permuting heads on either side leaves the score unchanged") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t J = 1 + rng.uniform_index(4), z = 1 + rng.uniform_index(8);
      auto u = hit::testing::random_tensor<double>({1, J * z}, 100 + trial);
      auto a = hit::testing::random_tensor<double>({1, J * z}, 200 + trial);
      const double base = kernels::max_then_sum<double>(u.data(), a.data(), J, z);
      std::vector<std::size_t> perm(J);
      for (std::size_t j = 0; j < J; ++j) perm[j] = j;
      rng.shuffle(std::span<std::size_t>(perm));
      Tensor<double> pu({1, J * z}), pa({1, J * z});
      for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t k = 0; k < z; ++k) {
          pu[j * z + k] = u[perm[j] * z + k];
          pa[j * z + k] = a[perm[j] * z + k];
        }
      }
      CHECK(kernels::max_then_sum<double>(u.data(), pa.data(), J, z) == base);
      // sum over user heads is reordered, so allow rounding
      CHECK(kernels::max_then_sum<double>(pu.data(), a.data(), J, z) == doctest::Approx(base).epsilon(1e-12));
    }
  }
}

TEST_CASE("generation loss") {
  Tape<double> tape;
  SUBCASE("aligned positives give -1 under cosine") {
    auto r = hit::testing::random_tensor({3, 4}, 5);
    Tensor<double> m = r;
    for (double& v : m.data()) v *= 2.5;
    const std::vector<double> labels{1, 1, 1};
    Var rv = tape.constant(r), mv = tape.constant(m);
    auto loss = generation_loss(tape, rv, std::optional<Var>(mv), std::optional<Var>(), std::span<const double>(labels), DistanceMetric::kCosine);
    CHECK(tape.value(*loss).item() == doctest::Approx(-1.0).epsilon(1e-12));
  }
  SUBCASE("two mixed samples match the expanded formula") {
    auto r = hit::testing::random_tensor({2, 4}, 6);
    auto m1 = hit::testing::random_tensor({2, 4}, 7);
    auto m2 = hit::testing::random_tensor({2, 4}, 8);
    const std::vector<double> labels{1, 0};
    auto cos = [](std::span<const double> a, std::span<const double> b) {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
      }
      return ab / (std::sqrt(aa) * std::sqrt(bb));
    };
    auto mse = [](std::span<const double> a, std::span<const double> b) {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return s / a.size();
    };
    auto mae = [](std::span<const double> a, std::span<const double> b) {
      double s = 0;
      for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
      return s / a.size();
    };
    Var rv = tape.constant(r), v1 = tape.constant(m1), v2 = tape.constant(m2);
    auto run = [&](DistanceMetric metric) {
      return tape.value(*generation_loss(tape, rv, std::optional<Var>(v1), std::optional<Var>(v2),
                                         std::span<const double>(labels), metric)).item();
    };
    CHECK(run(DistanceMetric::kCosine) ==
          doctest::Approx(-0.5 * (cos(r.row(0), m1.row(0)) + cos(r.row(1), m2.row(1)))).epsilon(1e-6));
    CHECK(run(DistanceMetric::kMse) ==
          doctest::Approx(0.5 * (mse(r.row(0), m1.row(0)) + mse(r.row(1), m2.row(1)))).epsilon(1e-6));
    CHECK(run(DistanceMetric::kMae) ==
          doctest::Approx(0.5 * (mae(r.row(0), m1.row(0)) + mae(r.row(1), m2.row(1)))).epsilon(1e-6));
  }
  SUBCASE("bounded by one under cosine") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Var rv = tape.constant(hit::testing::random_tensor({6, 5}, seed));
      Var v1 = tape.constant(hit::testing::random_tensor({6, 5}, seed + 100));
      Var v2 = tape.constant(hit::testing::random_tensor({6, 5}, seed + 200));
      const std::vector<double> labels{1, 0, 0, 1, 1, 0};
      const double l = tape.value(*generation_loss(tape, rv, std::optional<Var>(v1), std::optional<Var>(v2),
                                                   std::span<const double>(labels), DistanceMetric::kCosine)).item();
      CHECK(l >= -1.0);
      CHECK(l <= 1.0);
    }
  }
  SUBCASE("no generators, no loss") {
    Var rv = tape.constant(Tensor<double>({1, 2}, 1.0));
    const std::vector<double> labels{1};
    CHECK_FALSE(generation_loss(tape, rv, std::nullopt, std::nullopt, std::span<const double>(labels), DistanceMetric::kCosine));
  }
}

TEST_CASE("cross entropy and total loss") {
  Tape<double> tape;
  SUBCASE("zero scores give ln 2") {
    Var s = tape.constant(Tensor<double>({4, 1}, 0.0));
    const std::vector<double> labels{1, 0, 1, 1};
    CHECK(tape.value(cross_entropy_loss(tape, s, std::span<const double>(labels))).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("saturated positive") {
    Var s = tape.constant(Tensor<double>({1, 1}, 30.0));
    const std::vector<double> labels{1};
    CHECK(tape.value(cross_entropy_loss(tape, s, std::span<const double>(labels))).item() < 1e-12);
  }
  SUBCASE("random batch against the direct formula") {
    auto scores = hit::testing::random_tensor({50, 1}, 3, -6, 6);
    Rng rng(4);
    std::vector<double> labels(50);
    for (double& y : labels) y = double(rng.uniform_index(2));
    double expect = 0;
    for (std::size_t i = 0; i < 50; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-scores[i]));
      expect -= labels[i] * std::log(p) + (1 - labels[i]) * std::log(1 - p);
    }
    expect /= 50;
    Var s = tape.constant(scores);
    CHECK(tape.value(cross_entropy_loss(tape, s, std::span<const double>(labels))).item() ==
          doctest::Approx(expect).epsilon(1e-6));
  }
  SUBCASE("total loss is linear in alpha") {
    Var ce = tape.constant(Tensor<double>::scalar(0.7));
    Var gu = tape.constant(Tensor<double>::scalar(-0.4));
    Var ga = tape.constant(Tensor<double>::scalar(-0.9));
    auto at = [&](double alpha) {
      return tape.value(total_loss(tape, ce, std::optional<Var>(gu), std::optional<Var>(ga), alpha)).item();
    };
    CHECK(at(0.0) == 0.7);
    const double l1 = at(1e-3), l2 = at(0.5);
    CHECK((l2 - l1) / (0.5 - 1e-3) == doctest::Approx(-1.3).epsilon(1e-9));
    CHECK(l1 == doctest::Approx(0.7 - 1.3e-3).epsilon(1e-12));
    CHECK_THROWS_AS(at(-1.0), ConfigError);
  }
}

TEST_CASE("full loss gradients agree with finite differences") {
  // alpha of order one: at 1e-3 the generator gradients (~1e-7) fall below the
  // roundoff floor of central differences on an O(1) loss.
  const auto schema = toy_schema();
  for (const auto metric : {DistanceMetric::kCosine, DistanceMetric::kMse, DistanceMetric::kMae}) {
    for (const double alpha : {0.5, 1.0}) {
      HitConfig config = toy_config();
      config.distance_metric = metric;
      config.alpha = alpha;
      const auto params = init_parameters(config, schema, 25).cast<double>();
      const auto layout = resolve_layout(config, schema, params);
      const auto batch = encode(random_dataset(schema, 4, 26));
      REQUIRE(hit::testing::away_from_zero_vectors(config, layout, params, batch));
      const auto report = grad_check(full_loss(config, layout, batch), params, 1e-4);
      CAPTURE(report.message);
      CHECK(report.valid);
      CHECK(report.passed);
    }
  }
}

TEST_CASE("stop-gradient partition") {
  const auto schema = toy_schema();
  const auto model = HitModel::initialize(toy_config(), schema, 31);
  const auto& params = model.params();
  const auto mixed = encode(random_dataset(schema, 8, 32));

  SUBCASE("generation losses never reach towers, embeddings or heads") {
    const auto g = gradients(model, mixed, LossPart::kGeneration);
    bool generator_moved = false;
    for (std::size_t i = 0; i < params.size(); ++i) {
      CAPTURE(params.name(i));
      if (is_generator(params.name(i))) {
        generator_moved = generator_moved || !all_zero(g[i]);
      } else {
        CHECK(all_zero(g[i]));
      }
    }
    CHECK(generator_moved);
  }
  SUBCASE("cross entropy never reaches generators") {
    const auto g = gradients(model, mixed, LossPart::kCrossEntropy);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (is_generator(params.name(i))) CHECK(all_zero(g[i]));
    }
  }
  SUBCASE("label gating of the two generators") {
    const auto positives = gradients(model, encode(random_dataset(schema, 8, 33, 1)), LossPart::kTotal);
    const auto negatives = gradients(model, encode(random_dataset(schema, 8, 34, 0)), LossPart::kTotal);
    bool target_moved = false, non_target_moved = false;
    for (std::size_t i = 0; i < params.size(); ++i) {
      CAPTURE(params.name(i));
      if (is_non_target_generator(params.name(i))) {
        CHECK(all_zero(positives[i]));
        non_target_moved = non_target_moved || !all_zero(negatives[i]);
      }
      if (is_target_generator(params.name(i))) {
        CHECK(all_zero(negatives[i]));
        target_moved = target_moved || !all_zero(positives[i]);
      }
    }
    CHECK(target_moved);
    CHECK(non_target_moved);
  }
}

TEST_CASE("ablation wiring") {
  const auto schema = toy_schema();
  const auto ds = random_dataset(schema, 6, 41);
  const auto batch = encode(ds);

  SUBCASE("without generators the tower input is e_u and no generation loss exists") {
    HitConfig config = toy_config();
    config.use_generators = false;
    const auto model = HitModel::initialize(config, schema, 1);
    Tape<float> tape;
    const auto vars = tape.parameters(model.params());
    const auto labels = labels_as<float>(batch);
    const auto trace = forward(tape, config, model.layout(), std::span<const Var>(vars), batch);
    CHECK(trace.user.fused.id == trace.user.embedding.id);
    const auto losses = compute_losses(tape, config, trace, std::span<const float>(labels));
    CHECK_FALSE(losses.generation_user);
    CHECK_FALSE(losses.generation_ad);
    CHECK(losses.total.id == losses.cross_entropy.id);
  }
  SUBCASE("without both the score is the inner product of unit tower outputs") {
    HitConfig config = toy_config();
    config.use_generators = false;
    config.use_representers = false;
    const auto model = HitModel::initialize(config, schema, 2);
    Tape<float> tape;
    const auto vars = tape.constants(model.params());
    const auto trace = forward(tape, config, model.layout(), std::span<const Var>(vars), batch);
    const auto& hu = tape.value(trace.user.hidden);
    const auto& ha = tape.value(trace.ad.hidden);
    for (std::size_t r = 0; r < 6; ++r) {
      double s = 0;
      for (std::size_t k = 0; k < 4; ++k) s += double(hu(r, k)) * ha(r, k);
      CHECK(tape.value(trace.scores)[r] == doctest::Approx(s).epsilon(1e-6));
      CHECK(std::abs(tape.value(trace.scores)[r]) <= 1.0f + 1e-5f);
    }
  }
  SUBCASE("without representers the generators mimic h") {
    HitConfig config = toy_config();
    config.use_representers = false;
    const auto model = HitModel::initialize(config, schema, 3);
    const auto g = gradients(model, batch, LossPart::kGeneration);
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      if (!is_generator(model.params().name(i))) CHECK(all_zero(g[i]));
    }
  }
  SUBCASE("generators may read the dynamic block") {
    HitConfig config = toy_config();
    config.generators_use_dynamic = true;
    const auto model = HitModel::initialize(config, schema, 4);
    CHECK(model.layout().user.generator_input_width == 12);
    CHECK(predict(model, batch).size() == 6);
  }
}

TEST_CASE("checkpoint round trip") {
  hit::testing::TempDir dir;
  const auto model = HitModel::initialize(toy_config(), toy_schema(), 51);
  save_checkpoint(model, dir / "model.json", {{"epoch", 3}});
  const auto loaded = load_checkpoint(dir / "model.json");
  CHECK(loaded.model.params() == model.params());
  CHECK(loaded.model.config() == model.config());
  CHECK(loaded.model.schema() == model.schema());
  CHECK(loaded.info.at("epoch") == 3);
  CHECK(std::filesystem::file_size(dir / "model.bin") == model.params().element_count() * 4);

  SUBCASE("saving twice gives identical bytes") {
    save_checkpoint(loaded.model, dir / "again.json", {{"epoch", 3}});
    CHECK(hit::testing::read_file(dir / "again.bin") == hit::testing::read_file(dir / "model.bin"));
  }
  SUBCASE("blob is little-endian float32") {
    const std::string bytes = hit::testing::read_file(dir / "model.bin");
    const float first = model.params().value(0)[0];
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= std::uint32_t(static_cast<unsigned char>(bytes[i])) << (8 * i);
    float decoded;
    std::memcpy(&decoded, &bits, 4);
    CHECK(decoded == first);
  }
  SUBCASE("truncated blob is rejected") {
    std::string bytes = hit::testing::read_file(dir / "model.bin");
    bytes.pop_back();
    hit::testing::write_file(dir / "model.bin", bytes);
    CHECK_THROWS_AS(load_checkpoint(dir / "model.json"), DimensionError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_checkpoint(dir / "nope.json"), IoError);
  }
}

TEST_CASE("tower encoders reproduce the joint forward exactly") {
  const auto schema = toy_schema();
  for (const bool representers : {true, false}) {
    HitConfig config = toy_config();
    config.use_representers = representers;
    const auto model = HitModel::initialize(config, schema, 61);
    const auto batch = encode(random_dataset(schema, 7, 62));
    const auto scores = predict(model, batch);
    const TowerEncoder users(model, Side::kUser), ads(model, Side::kAd);
    const auto before = TowerEncoder::ad_layer_evaluations();
    const auto ru = users.encode(batch.user_static, batch.user_dynamic);
    CHECK(TowerEncoder::ad_layer_evaluations() == before);
    const auto ra = ads.encode(batch.ad_static, batch.ad_dynamic);
    CHECK(TowerEncoder::ad_layer_evaluations() == before + 7 * config.tower_widths.size());
    for (std::size_t r = 0; r < 7; ++r) {
      CHECK(kernels::max_then_sum<float>(ru.row(r), ra.row(r), model.heads(), model.head_dim()) == scores[r]);
    }
  }
}
