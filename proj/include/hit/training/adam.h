#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hit/numerics/tape.h"

namespace hit {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;  // ConfigError

  friend bool operator==(const AdamHyper&, const AdamHyper&) = default;
};

// First/second moments shaped like the parameters, plus the step count.
class AdamState {
 public:
  explicit AdamState(const ParameterSet<float>& params);

  std::uint64_t step() const { return step_; }
  const std::vector<Tensor<float>>& first_moment() const { return m_; }
  const std::vector<Tensor<float>>& second_moment() const { return v_; }

 private:
  friend void adam_step(ParameterSet<float>&, std::span<const Tensor<float>>, AdamState&,
                        const AdamHyper&);
  std::uint64_t step_ = 0;
  std::vector<Tensor<float>> m_;
  std::vector<Tensor<float>> v_;
};

// Bias-corrected update. Throws NumericError naming the parameter when a
// gradient holds NaN/Inf; nothing is modified in that case.
void adam_step(ParameterSet<float>& params, std::span<const Tensor<float>> grads, AdamState& state,
               const AdamHyper& hyper);

}  // namespace hit
