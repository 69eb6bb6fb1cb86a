#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "hit/data/dataset.h"
#include "hit/model/hit_model.h"
#include "hit/numerics/tape.h"

// The HIT forward graph on a Tape. Every function works on whole batches
// (one row per sample) and is instantiated for float and double. `vars` maps
// parameter indices of the model's ParameterSet to tape leaves; a side that is
// not evaluated may leave its entries unset.
namespace hit {

// Concatenated embeddings of the listed fields, [rows x d*fields].
template <typename T>
Var embed(Tape<T>& tape, std::span<const Var> vars, std::span<const std::size_t> tables,
          const IndexMatrix& indices);

// e = [e_static, e_dynamic] of one tower.
template <typename T>
Var embed_tower(Tape<T>& tape, std::span<const Var> vars, const TowerParams& tower,
                const IndexMatrix& static_ids, const IndexMatrix& dynamic_ids);

// ReLU on every layer, then row-wise L2 normalization.
template <typename T>
Var tower_forward(Tape<T>& tape, std::span<const Var> vars, const TowerParams& tower, Var input);

// Detaches `input`, runs the ReLU MLP and the linear output layer, normalizes.
template <typename T>
Var generator_forward(Tape<T>& tape, std::span<const Var> vars, const GeneratorParams& gen,
                      Var input);

// concat(sg(mimic_1), ..., sg(mimic_K), e). Returns e itself when there are no mimics.
template <typename T>
Var fuse(Tape<T>& tape, Var embedding, std::span<const Var> mimics);

// Affine heads side by side, [rows x J*z] in head-major order.
template <typename T>
Var representer_forward(Tape<T>& tape, std::span<const Var> vars, const TowerParams& tower,
                        Var hidden);

template <typename T>
Var score_max_then_sum(Tape<T>& tape, Var user_heads, Var ad_heads, std::size_t heads,
                       std::size_t head_dim);

template <typename T>
Var vanilla_score(Tape<T>& tape, Var user_hidden, Var ad_hidden);

// -(1/N) sum_i [y_i Sim(r_i, m1_i) + (1-y_i) Sim(r_i, m2_i)] with r detached.
// Sim is cosine similarity, or the negated MSE/MAE. An absent generator drops
// its term. Returns nullopt when both are absent.
template <typename T>
std::optional<Var> generation_loss(Tape<T>& tape, Var representation,
                                   const std::optional<Var>& target_mimic,
                                   const std::optional<Var>& non_target_mimic,
                                   std::span<const T> labels, DistanceMetric metric);

template <typename T>
Var cross_entropy_loss(Tape<T>& tape, Var scores, std::span<const T> labels);

// L_c + alpha * (L_gu + L_ga); missing generation terms count as zero.
template <typename T>
Var total_loss(Tape<T>& tape, Var ce, const std::optional<Var>& gen_user,
               const std::optional<Var>& gen_ad, T alpha);

template <typename T>
struct TowerTrace {
  Var embedding{};
  std::array<std::optional<Var>, 2> mimics;  // by GeneratorRole
  Var fused{};
  Var hidden{};          // h, unit rows
  Var representation{};  // r (heads) with representers, otherwise h
};

// Everything one tower computes for its rows.
template <typename T>
TowerTrace<T> tower_pass(Tape<T>& tape, const HitConfig& config, const TowerParams& tower,
                         std::span<const Var> vars, const IndexMatrix& static_ids,
                         const IndexMatrix& dynamic_ids);

template <typename T>
struct ForwardTrace {
  TowerTrace<T> user;
  TowerTrace<T> ad;
  Var scores{};  // [rows x 1], pre-sigmoid
};

template <typename T>
ForwardTrace<T> forward(Tape<T>& tape, const HitConfig& config, const ModelLayout& layout,
                        std::span<const Var> vars, const EncodedBatch& batch);

template <typename T>
struct LossTrace {
  Var cross_entropy{};
  std::optional<Var> generation_user;  // representation r_u against the ad tower's mimics
  std::optional<Var> generation_ad;    // r_a against the user tower's mimics
  Var total{};
};

template <typename T>
LossTrace<T> compute_losses(Tape<T>& tape, const HitConfig& config, const ForwardTrace<T>& trace,
                            std::span<const T> labels);

// Scores without gradients, one per batch row.
std::vector<float> predict(const HitModel& model, const EncodedBatch& batch);

}  // namespace hit
