#include "hit/model/hit_model.h"

#include <cmath>

#include "hit/error.h"
#include "hit/numerics/random.h"

namespace hit {

std::string side_name(Side side) { return side == Side::kUser ? "user" : "ad"; }

namespace {

const char* role_name(std::size_t role) { return role == 0 ? "target" : "non_target"; }

FeatureBlock static_block(Side side) {
  return side == Side::kUser ? FeatureBlock::kUserStatic : FeatureBlock::kAdStatic;
}

FeatureBlock dynamic_block(Side side) {
  return side == Side::kUser ? FeatureBlock::kUserDynamic : FeatureBlock::kAdDynamic;
}

// Shapes of every parameter of one tower in creation order.
struct ParamSpec {
  std::string name;
  Shape shape;
  enum Kind { kEmbedding, kWeight, kBias } kind;
};

std::vector<ParamSpec> tower_specs(const HitConfig& config, const FeatureSchema& schema,
                                   Side side) {
  const std::string prefix = side_name(side);
  const std::size_t d = config.embedding_dim;
  std::vector<ParamSpec> specs;
  for (FeatureBlock block : {static_block(side), dynamic_block(side)}) {
    for (const FeatureField& f : schema.block_fields(block)) {
      specs.push_back({prefix + ".emb." + f.name, {f.cardinality, d}, ParamSpec::kEmbedding});
    }
  }
  auto linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    specs.push_back({name + ".weight", {in, out}, ParamSpec::kWeight});
    specs.push_back({name + ".bias", {1, out}, ParamSpec::kBias});
  };

  const std::size_t n_static = schema.width(static_block(side));
  const std::size_t n_dynamic = schema.width(dynamic_block(side));
  const std::size_t p = config.mimic_dim();
  const std::size_t gen_in = d * (n_static + (config.generators_use_dynamic ? n_dynamic : 0));
  for (std::size_t role = 0; role < 2; ++role) {
    if (!config.has_generator(static_cast<GeneratorRole>(role))) continue;
    const std::string gen = prefix + ".gen." + role_name(role);
    std::size_t in = gen_in;
    for (std::size_t l = 0; l < config.generator_widths.size(); ++l) {
      linear(gen + "." + std::to_string(l), in, config.generator_widths[l]);
      in = config.generator_widths[l];
    }
    linear(gen + ".out", in, p);
  }

  std::size_t in = d * (n_static + n_dynamic) + config.active_generators() * p;
  for (std::size_t l = 0; l < config.tower_widths.size(); ++l) {
    linear(prefix + ".tower." + std::to_string(l), in, config.tower_widths[l]);
    in = config.tower_widths[l];
  }
  if (config.use_representers) {
    for (std::size_t j = 0; j < config.num_heads; ++j) {
      linear(prefix + ".head." + std::to_string(j), config.output_dim(), config.head_dim);
    }
  }
  return specs;
}

template <typename T>
std::size_t lookup(const ParameterSet<T>& params, const std::string& name, const Shape& shape) {
  auto index = params.find(name);
  if (!index) throw DimensionError("missing parameter " + name);
  if (params.value(*index).shape() != shape) {
    throw DimensionError("parameter " + name + " has shape " +
                         shape_string(params.value(*index).shape()) + ", expected " +
                         shape_string(shape));
  }
  return *index;
}

template <typename T>
TowerParams resolve_tower(const HitConfig& config, const FeatureSchema& schema,
                          const ParameterSet<T>& params, Side side) {
  TowerParams tower;
  const std::string prefix = side_name(side);
  const std::size_t d = config.embedding_dim;
  for (const FeatureField& f : schema.block_fields(static_block(side))) {
    tower.static_tables.push_back(lookup(params, prefix + ".emb." + f.name, {f.cardinality, d}));
  }
  for (const FeatureField& f : schema.block_fields(dynamic_block(side))) {
    tower.dynamic_tables.push_back(lookup(params, prefix + ".emb." + f.name, {f.cardinality, d}));
  }
  auto linear = [&](const std::string& name, std::size_t in, std::size_t out) {
    return LinearParams{lookup(params, name + ".weight", {in, out}),
                        lookup(params, name + ".bias", {1, out})};
  };

  const std::size_t p = config.mimic_dim();
  tower.generator_input_width =
      d * (tower.static_tables.size() +
           (config.generators_use_dynamic ? tower.dynamic_tables.size() : 0));
  for (std::size_t role = 0; role < 2; ++role) {
    if (!config.has_generator(static_cast<GeneratorRole>(role))) continue;
    const std::string gen = prefix + ".gen." + role_name(role);
    GeneratorParams g;
    std::size_t in = tower.generator_input_width;
    for (std::size_t l = 0; l < config.generator_widths.size(); ++l) {
      g.hidden.push_back(linear(gen + "." + std::to_string(l), in, config.generator_widths[l]));
      in = config.generator_widths[l];
    }
    g.output = linear(gen + ".out", in, p);
    tower.generators[role] = std::move(g);
  }

  tower.input_width = d * (tower.static_tables.size() + tower.dynamic_tables.size()) +
                      config.active_generators() * p;
  std::size_t in = tower.input_width;
  for (std::size_t l = 0; l < config.tower_widths.size(); ++l) {
    tower.layers.push_back(linear(prefix + ".tower." + std::to_string(l), in, config.tower_widths[l]));
    in = config.tower_widths[l];
  }
  if (config.use_representers) {
    for (std::size_t j = 0; j < config.num_heads; ++j) {
      tower.heads.push_back(
          linear(prefix + ".head." + std::to_string(j), config.output_dim(), config.head_dim));
    }
  }
  return tower;
}

}  // namespace

ParameterSet<float> init_parameters(const HitConfig& config, const FeatureSchema& schema,
                                    std::uint64_t seed) {
  config.validate();
  ParameterSet<float> params;
  for (Side side : {Side::kUser, Side::kAd}) {
    for (const ParamSpec& spec : tower_specs(config, schema, side)) {
      Tensor<float> value(spec.shape);
      Rng rng(derive_seed(seed, params.size()));
      switch (spec.kind) {
        case ParamSpec::kEmbedding: {
          const double stddev = 1.0 / std::sqrt(static_cast<double>(config.embedding_dim));
          for (float& v : value.data()) v = static_cast<float>(rng.normal(0.0, stddev));
          break;
        }
        case ParamSpec::kWeight: {
          const double limit =
              std::sqrt(6.0 / static_cast<double>(spec.shape[0] + spec.shape[1]));
          for (float& v : value.data()) v = static_cast<float>(rng.uniform(-limit, limit));
          break;
        }
        case ParamSpec::kBias:
          break;
      }
      params.add(spec.name, std::move(value));
    }
  }
  return params;
}

template <typename T>
ModelLayout resolve_layout(const HitConfig& config, const FeatureSchema& schema,
                           const ParameterSet<T>& params) {
  config.validate();
  ModelLayout layout{resolve_tower(config, schema, params, Side::kUser),
                     resolve_tower(config, schema, params, Side::kAd)};
  std::size_t expected = 0;
  for (Side side : {Side::kUser, Side::kAd}) expected += tower_specs(config, schema, side).size();
  if (expected != params.size()) {
    throw DimensionError("parameter set holds " + std::to_string(params.size()) +
                         " tensors, model expects " + std::to_string(expected));
  }
  return layout;
}

template ModelLayout resolve_layout<float>(const HitConfig&, const FeatureSchema&,
                                           const ParameterSet<float>&);
template ModelLayout resolve_layout<double>(const HitConfig&, const FeatureSchema&,
                                            const ParameterSet<double>&);

HitModel::HitModel(HitConfig config, FeatureSchema schema, ParameterSet<float> params)
    : config_(std::move(config)), schema_(std::move(schema)), params_(std::move(params)) {
  layout_ = resolve_layout(config_, schema_, params_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!params_.value(i).all_finite()) {
      throw NumericError("parameter " + params_.name(i) + " holds non-finite values");
    }
  }
}

HitModel HitModel::initialize(const HitConfig& config, const FeatureSchema& schema,
                              std::uint64_t seed) {
  return HitModel(config, schema, init_parameters(config, schema, seed));
}

std::size_t HitModel::heads() const { return config_.use_representers ? config_.num_heads : 1; }

std::size_t HitModel::head_dim() const {
  return config_.use_representers ? config_.head_dim : config_.output_dim();
}

}  // namespace hit
