#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hit/data/schema.h"
#include "hit/model/config.h"
#include "hit/numerics/tape.h"

namespace hit {

enum class Side { kUser = 0, kAd = 1 };

std::string side_name(Side side);

// Parameter indices of an affine layer x * weight + bias, with weight stored
// input-major as [in x out] and bias as [1 x out].
struct LinearParams {
  std::size_t weight = 0;
  std::size_t bias = 0;
};

struct GeneratorParams {
  std::vector<LinearParams> hidden;  // ReLU layers
  LinearParams output;               // linear layer to the mimic width
};

// Everything one tower owns. Generators are indexed by GeneratorRole.
struct TowerParams {
  std::vector<std::size_t> static_tables;
  std::vector<std::size_t> dynamic_tables;
  std::vector<LinearParams> layers;
  std::array<std::optional<GeneratorParams>, 2> generators;
  std::vector<LinearParams> heads;  // empty when representers are disabled
  std::size_t input_width = 0;      // d0 of the tower DNN, mimics included
  std::size_t generator_input_width = 0;
};

struct ModelLayout {
  TowerParams user;
  TowerParams ad;

  const TowerParams& tower(Side side) const { return side == Side::kUser ? user : ad; }
};

// Parameter names follow "<side>.<part>...", e.g. "user.emb.gender",
// "ad.tower.0.weight", "user.gen.target.out.bias", "ad.head.1.weight".
// Initialization: Glorot-uniform weights, zero biases, N(0, 1/sqrt(d)) embedding
// rows; each tensor draws from its own stream derived from `seed`.
ParameterSet<float> init_parameters(const HitConfig& config, const FeatureSchema& schema,
                                    std::uint64_t seed);

// Resolves parameter indices by name and checks every shape against the
// config and schema. Throws DimensionError on any disagreement.
template <typename T>
ModelLayout resolve_layout(const HitConfig& config, const FeatureSchema& schema,
                           const ParameterSet<T>& params);

// A configured model with its (32-bit) parameters.
class HitModel {
 public:
  HitModel(HitConfig config, FeatureSchema schema, ParameterSet<float> params);
  static HitModel initialize(const HitConfig& config, const FeatureSchema& schema,
                             std::uint64_t seed);

  const HitConfig& config() const { return config_; }
  const FeatureSchema& schema() const { return schema_; }
  const ParameterSet<float>& params() const { return params_; }
  ParameterSet<float>& mutable_params() { return params_; }
  const ModelLayout& layout() const { return layout_; }

  // Shape of the scored representation: J x z with representers, 1 x d_L
  // without (the vanilla inner product is max-then-sum with a single head).
  std::size_t heads() const;
  std::size_t head_dim() const;

 private:
  HitConfig config_;
  FeatureSchema schema_;
  ParameterSet<float> params_;
  ModelLayout layout_;
};

}  // namespace hit
