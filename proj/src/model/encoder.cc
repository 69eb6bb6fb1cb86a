#include "hit/model/encoder.h"

#include "hit/error.h"
#include "hit/model/forward.h"

namespace hit {

namespace {

std::atomic<std::uint64_t> g_ad_layers{0};

void collect_linear(const LinearParams& p, std::vector<std::size_t>& out) {
  out.push_back(p.weight);
  out.push_back(p.bias);
}

std::vector<std::size_t> tower_param_indices(const TowerParams& t) {
  std::vector<std::size_t> out(t.static_tables.begin(), t.static_tables.end());
  out.insert(out.end(), t.dynamic_tables.begin(), t.dynamic_tables.end());
  for (const auto& g : t.generators) {
    if (!g) continue;
    for (const auto& l : g->hidden) collect_linear(l, out);
    collect_linear(g->output, out);
  }
  for (const auto& l : t.layers) collect_linear(l, out);
  for (const auto& l : t.heads) collect_linear(l, out);
  return out;
}

}  // namespace

TowerEncoder::TowerEncoder(const HitModel& model, Side side) : model_(model), side_(side) {}

std::size_t TowerEncoder::input_columns(FeatureBlock block) const {
  return model_.schema().width(block);
}

Tensor<float> TowerEncoder::encode(const IndexMatrix& static_ids,
                                   const IndexMatrix& dynamic_ids) const {
  const TowerParams& tower = model_.layout().tower(side_);
  if (static_ids.cols() != tower.static_tables.size() ||
      dynamic_ids.cols() != tower.dynamic_tables.size()) {
    throw DimensionError(side_name(side_) + " encoder: feature columns do not match the schema");
  }
  if (!tower.dynamic_tables.empty() && dynamic_ids.rows() != static_ids.rows()) {
    throw DimensionError(side_name(side_) + " encoder: block row counts differ");
  }
  Tape<float> tape;
  const auto& params = model_.params();
  std::vector<Var> vars(params.size());
  for (std::size_t i : tower_param_indices(tower)) vars[i] = tape.constant(params.value(i));
  const auto trace = tower_pass(tape, model_.config(), tower, std::span<const Var>(vars),
                                static_ids, dynamic_ids);
  if (side_ == Side::kAd) g_ad_layers += tower.layers.size() * static_ids.rows();
  return tape.value(trace.representation);
}

std::uint64_t TowerEncoder::ad_layer_evaluations() { return g_ad_layers.load(); }

}  // namespace hit
