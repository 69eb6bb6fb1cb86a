#include "hit/model/forward.h"

#include "hit/error.h"
#include "hit/numerics/ops.h"

namespace hit {

namespace {

template <typename T>
Var linear(Tape<T>& tape, std::span<const Var> vars, const LinearParams& p, Var x) {
  return ops::add_bias(tape, ops::matmul(tape, x, vars[p.weight]), vars[p.bias]);
}

}  // namespace

template <typename T>
Var embed(Tape<T>& tape, std::span<const Var> vars, std::span<const std::size_t> tables,
          const IndexMatrix& indices) {
  if (tables.size() != indices.cols()) {
    throw DimensionError("embed: " + std::to_string(indices.cols()) + " index columns for " +
                         std::to_string(tables.size()) + " tables");
  }
  if (tables.empty()) throw DimensionError("embed: no fields");
  std::vector<Var> parts;
  parts.reserve(tables.size());
  for (std::size_t f = 0; f < tables.size(); ++f) {
    parts.push_back(ops::gather_rows(tape, vars[tables[f]], indices.column(f)));
  }
  return parts.size() == 1 ? parts[0] : ops::concat(tape, std::span<const Var>(parts));
}

template <typename T>
Var embed_tower(Tape<T>& tape, std::span<const Var> vars, const TowerParams& tower,
                const IndexMatrix& static_ids, const IndexMatrix& dynamic_ids) {
  Var e = embed(tape, vars, tower.static_tables, static_ids);
  if (tower.dynamic_tables.empty()) return e;
  Var g = embed(tape, vars, tower.dynamic_tables, dynamic_ids);
  const Var parts[] = {e, g};
  return ops::concat(tape, std::span<const Var>(parts));
}

template <typename T>
Var tower_forward(Tape<T>& tape, std::span<const Var> vars, const TowerParams& tower, Var input) {
  if (tape.value(input).cols() != tower.input_width) {
    throw DimensionError("tower input width " + std::to_string(tape.value(input).cols()) +
                         ", expected " + std::to_string(tower.input_width));
  }
  Var h = input;
  for (const LinearParams& layer : tower.layers) h = ops::relu(tape, linear(tape, vars, layer, h));
  return ops::l2_normalize(tape, h);
}

template <typename T>
Var generator_forward(Tape<T>& tape, std::span<const Var> vars, const GeneratorParams& gen,
                      Var input) {
  Var x = ops::stop_gradient(tape, input);
  for (const LinearParams& layer : gen.hidden) x = ops::relu(tape, linear(tape, vars, layer, x));
  return ops::l2_normalize(tape, linear(tape, vars, gen.output, x));
}

template <typename T>
Var fuse(Tape<T>& tape, Var embedding, std::span<const Var> mimics) {
  if (mimics.empty()) return embedding;
  std::vector<Var> parts;
  for (Var m : mimics) parts.push_back(ops::stop_gradient(tape, m));
  parts.push_back(embedding);
  return ops::concat(tape, std::span<const Var>(parts));
}

template <typename T>
Var representer_forward(Tape<T>& tape, std::span<const Var> vars, const TowerParams& tower,
                        Var hidden) {
  if (tower.heads.empty()) throw ContractError("representer_forward: tower has no heads");
  std::vector<Var> heads;
  for (const LinearParams& head : tower.heads) heads.push_back(linear(tape, vars, head, hidden));
  return heads.size() == 1 ? heads[0] : ops::concat(tape, std::span<const Var>(heads));
}

template <typename T>
Var score_max_then_sum(Tape<T>& tape, Var user_heads, Var ad_heads, std::size_t heads,
                       std::size_t head_dim) {
  return ops::max_then_sum(tape, user_heads, ad_heads, heads, head_dim);
}

template <typename T>
Var vanilla_score(Tape<T>& tape, Var user_hidden, Var ad_hidden) {
  return ops::row_dot(tape, user_hidden, ad_hidden);
}

template <typename T>
std::optional<Var> generation_loss(Tape<T>& tape, Var representation,
                                   const std::optional<Var>& target_mimic,
                                   const std::optional<Var>& non_target_mimic,
                                   std::span<const T> labels, DistanceMetric metric) {
  const std::size_t n = tape.value(representation).rows();
  if (labels.size() != n) {
    throw DimensionError("generation_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  Var r = ops::stop_gradient(tape, representation);
  // Cosine is a similarity, so it enters with a minus sign; MSE/MAE are
  // distances (Sim = -distance) and enter with a plus sign.
  const T sign = metric == DistanceMetric::kCosine ? T(-1) : T(1);
  auto term = [&](Var mimic, bool positive) {
    Var sim;
    switch (metric) {
      case DistanceMetric::kCosine: sim = ops::cosine_similarity(tape, r, mimic); break;
      case DistanceMetric::kMse: sim = ops::row_mse(tape, r, mimic); break;
      case DistanceMetric::kMae: sim = ops::row_mae(tape, r, mimic); break;
    }
    std::vector<T> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const T gate = positive ? labels[i] : T(1) - labels[i];
      w[i] = sign * gate / static_cast<T>(n);
    }
    return ops::weighted_sum(tape, sim, std::span<const T>(w));
  };
  std::optional<Var> loss;
  if (target_mimic) loss = term(*target_mimic, true);
  if (non_target_mimic) {
    Var t = term(*non_target_mimic, false);
    loss = loss ? ops::add(tape, *loss, t) : t;
  }
  return loss;
}

template <typename T>
Var cross_entropy_loss(Tape<T>& tape, Var scores, std::span<const T> labels) {
  return ops::sigmoid_cross_entropy(tape, scores, labels);
}

template <typename T>
Var total_loss(Tape<T>& tape, Var ce, const std::optional<Var>& gen_user,
               const std::optional<Var>& gen_ad, T alpha) {
  if (!(alpha >= T(0))) throw ConfigError("alpha must be >= 0");
  std::optional<Var> gen = gen_user;
  if (gen_ad) gen = gen ? ops::add(tape, *gen, *gen_ad) : *gen_ad;
  if (!gen) return ce;
  return ops::add(tape, ce, ops::scale(tape, *gen, alpha));
}

template <typename T>
TowerTrace<T> tower_pass(Tape<T>& tape, const HitConfig& config, const TowerParams& tower,
                         std::span<const Var> vars, const IndexMatrix& static_ids,
                         const IndexMatrix& dynamic_ids) {
  TowerTrace<T> out;
  out.embedding = embed_tower(tape, vars, tower, static_ids, dynamic_ids);
  std::vector<Var> mimics;
  if (tower.generators[0] || tower.generators[1]) {
    Var gen_input = config.generators_use_dynamic
                        ? out.embedding
                        : embed(tape, vars, tower.static_tables, static_ids);
    for (std::size_t role = 0; role < 2; ++role) {
      if (!tower.generators[role]) continue;
      out.mimics[role] = generator_forward(tape, vars, *tower.generators[role], gen_input);
      mimics.push_back(*out.mimics[role]);
    }
  }
  out.fused = fuse(tape, out.embedding, std::span<const Var>(mimics));
  out.hidden = tower_forward(tape, vars, tower, out.fused);
  out.representation =
      tower.heads.empty() ? out.hidden : representer_forward(tape, vars, tower, out.hidden);
  return out;
}

template <typename T>
ForwardTrace<T> forward(Tape<T>& tape, const HitConfig& config, const ModelLayout& layout,
                        std::span<const Var> vars, const EncodedBatch& batch) {
  ForwardTrace<T> out;
  out.user = tower_pass(tape, config, layout.user, vars, batch.user_static, batch.user_dynamic);
  out.ad = tower_pass(tape, config, layout.ad, vars, batch.ad_static, batch.ad_dynamic);
  out.scores = config.use_representers
                   ? score_max_then_sum(tape, out.user.representation, out.ad.representation,
                                        config.num_heads, config.head_dim)
                   : vanilla_score(tape, out.user.hidden, out.ad.hidden);
  return out;
}

template <typename T>
LossTrace<T> compute_losses(Tape<T>& tape, const HitConfig& config, const ForwardTrace<T>& trace,
                            std::span<const T> labels) {
  LossTrace<T> out;
  out.cross_entropy = cross_entropy_loss(tape, trace.scores, labels);
  // Each tower's generators mimic the opposite tower's representation.
  out.generation_user = generation_loss(tape, trace.user.representation, trace.ad.mimics[0],
                                        trace.ad.mimics[1], labels, config.distance_metric);
  out.generation_ad = generation_loss(tape, trace.ad.representation, trace.user.mimics[0],
                                      trace.user.mimics[1], labels, config.distance_metric);
  out.total = total_loss(tape, out.cross_entropy, out.generation_user, out.generation_ad,
                         static_cast<T>(config.alpha));
  return out;
}

std::vector<float> predict(const HitModel& model, const EncodedBatch& batch) {
  Tape<float> tape;
  const std::vector<Var> vars = tape.constants(model.params());
  const auto trace = forward(tape, model.config(), model.layout(), std::span<const Var>(vars), batch);
  const auto data = tape.value(trace.scores).data();
  return std::vector<float>(data.begin(), data.end());
}

#define HIT_INSTANTIATE_FORWARD(T)                                                             \
  template Var embed<T>(Tape<T>&, std::span<const Var>, std::span<const std::size_t>,          \
                        const IndexMatrix&);                                                   \
  template Var embed_tower<T>(Tape<T>&, std::span<const Var>, const TowerParams&,              \
                              const IndexMatrix&, const IndexMatrix&);                         \
  template Var tower_forward<T>(Tape<T>&, std::span<const Var>, const TowerParams&, Var);      \
  template Var generator_forward<T>(Tape<T>&, std::span<const Var>, const GeneratorParams&,    \
                                    Var);                                                      \
  template Var fuse<T>(Tape<T>&, Var, std::span<const Var>);                                   \
  template Var representer_forward<T>(Tape<T>&, std::span<const Var>, const TowerParams&, Var); \
  template Var score_max_then_sum<T>(Tape<T>&, Var, Var, std::size_t, std::size_t);            \
  template Var vanilla_score<T>(Tape<T>&, Var, Var);                                           \
  template std::optional<Var> generation_loss<T>(Tape<T>&, Var, const std::optional<Var>&,     \
                                                 const std::optional<Var>&,                    \
                                                 std::span<const T>, DistanceMetric);          \
  template Var cross_entropy_loss<T>(Tape<T>&, Var, std::span<const T>);                       \
  template Var total_loss<T>(Tape<T>&, Var, const std::optional<Var>&,                         \
                             const std::optional<Var>&, T);                                    \
  template TowerTrace<T> tower_pass<T>(Tape<T>&, const HitConfig&, const TowerParams&,         \
                                       std::span<const Var>, const IndexMatrix&,               \
                                       const IndexMatrix&);                                    \
  template ForwardTrace<T> forward<T>(Tape<T>&, const HitConfig&, const ModelLayout&,          \
                                      std::span<const Var>, const EncodedBatch&);              \
  template LossTrace<T> compute_losses<T>(Tape<T>&, const HitConfig&, const ForwardTrace<T>&,  \
                                          std::span<const T>);

HIT_INSTANTIATE_FORWARD(float)
HIT_INSTANTIATE_FORWARD(double)

#undef HIT_INSTANTIATE_FORWARD

}  // namespace hit
