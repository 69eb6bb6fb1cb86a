#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hit/numerics/tape.h"

namespace hit {

// Builds a scalar on `tape` from parameter leaves registered in ParameterSet
// order. Must be deterministic.
using ScalarFunction = std::function<Var(Tape<double>&, std::span<const Var>)>;

struct GradCheckOptions {
  double step = 1e-5;
  double epsilon = 1e-8;
  // Parameters with more elements than this are checked on a seeded random
  // subset of this many elements.
  std::size_t max_elements_per_param = 10000;
  std::uint64_t seed = 0;
};

struct ParamGradCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_element = 0;
};

struct GradCheckReport {
  std::vector<ParamGradCheck> params;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  // False when two forward passes at the same point disagreed.
  bool valid = true;
  bool passed = false;
  std::string message;
};

// |analytic - numeric| / max(|analytic|, |numeric|, epsilon)
double relative_error(double analytic, double numeric, double epsilon = 1e-8);

// Compares reverse-mode gradients of `f` at `params` against central
// differences, 64-bit throughout.
GradCheckReport grad_check(const ScalarFunction& f, const ParameterSet<double>& params,
                           double tolerance, const GradCheckOptions& options = {});

// Same comparison against caller-supplied analytic gradients (one tensor per
// parameter, in order).
GradCheckReport compare_gradients(const ScalarFunction& f, const ParameterSet<double>& params,
                                  std::span<const Tensor<double>> analytic, double tolerance,
                                  const GradCheckOptions& options = {});

// Reverse-mode gradients of `f` at `params`; unreachable parameters get zeros.
std::vector<Tensor<double>> analytic_gradients(const ScalarFunction& f,
                                               const ParameterSet<double>& params);

}  // namespace hit
