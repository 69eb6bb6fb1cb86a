#include "hit/training/adam.h"

#include <cmath>

#include "hit/error.h"

namespace hit {

void AdamHyper::validate() const {
  if (!(lr > 0)) throw ConfigError("lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(eps > 0)) throw ConfigError("eps must be > 0");
}

AdamState::AdamState(const ParameterSet<float>& params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params.value(i).shape(), 0.0f);
    v_.emplace_back(params.value(i).shape(), 0.0f);
  }
}

void adam_step(ParameterSet<float>& params, std::span<const Tensor<float>> grads, AdamState& state,
               const AdamHyper& hyper) {
  if (grads.size() != params.size() || state.m_.size() != params.size()) {
    throw DimensionError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params.value(i).shape()) {
      throw DimensionError("adam_step: gradient of " + params.name(i) + " has shape " +
                           shape_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) {
      throw NumericError("adam_step: non-finite gradient for " + params.name(i) + " at step " +
                         std::to_string(state.step_ + 1));
    }
  }
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const float b1 = static_cast<float>(hyper.beta1);
  const float b2 = static_cast<float>(hyper.beta2);
  const float c1 = static_cast<float>(1.0 / (1.0 - std::pow(hyper.beta1, t)));
  const float c2 = static_cast<float>(1.0 / (1.0 - std::pow(hyper.beta2, t)));
  const float lr = static_cast<float>(hyper.lr);
  const float eps = static_cast<float>(hyper.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params.value(i).data();
    auto m = state.m_[i].data();
    auto v = state.v_[i].data();
    auto g = grads[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0f - b1) * g[k];
      v[k] = b2 * v[k] + (1.0f - b2) * g[k] * g[k];
      w[k] -= lr * (m[k] * c1) / (std::sqrt(v[k] * c2) + eps);
    }
  }
}

}  // namespace hit
