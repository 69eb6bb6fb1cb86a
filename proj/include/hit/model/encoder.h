#pragma once

#include <atomic>
#include <cstdint>

#include "hit/data/dataset.h"
#include "hit/model/hit_model.h"
#include "hit/numerics/tensor.h"

namespace hit {

// Inference for one tower: embeddings, generators, fuse, tower and heads,
// with only that tower's parameters placed on the tape. The output is the
// scored representation, [rows x heads*head_dim] (see HitModel::heads()).
class TowerEncoder {
 public:
  TowerEncoder(const HitModel& model, Side side);

  Side side() const { return side_; }
  std::size_t input_columns(FeatureBlock block) const;
  Tensor<float> encode(const IndexMatrix& static_ids, const IndexMatrix& dynamic_ids) const;

  // Number of dense tower layers the ad-side encoders have evaluated, summed
  // over rows. Serving uses it to prove the cached path never runs the ad tower.
  static std::uint64_t ad_layer_evaluations();

 private:
  const HitModel& model_;
  Side side_;
};

}  // namespace hit
