#include "hit/numerics/grad_check.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hit/error.h"
#include "hit/numerics/random.h"

namespace hit {

namespace {

// Stop-gradient outputs are replayed from the base point, so the numeric
// derivative is that of the surrogate the analytic pass differentiates.
double evaluate(const ScalarFunction& f, const ParameterSet<double>& params,
                const std::vector<Tensor<double>>& frozen) {
  Tape<double> tape;
  tape.replay_stop_gradients(&frozen);
  std::vector<Var> vars = tape.constants(params);
  return tape.value(f(tape, vars)).item();
}

double record(const ScalarFunction& f, const ParameterSet<double>& params,
              std::vector<Tensor<double>>& frozen) {
  Tape<double> tape;
  tape.record_stop_gradients(&frozen);
  std::vector<Var> vars = tape.constants(params);
  return tape.value(f(tape, vars)).item();
}

std::vector<std::size_t> elements_to_check(std::size_t size, const GradCheckOptions& options,
                                           std::size_t param_index) {
  std::vector<std::size_t> all(size);
  for (std::size_t i = 0; i < size; ++i) all[i] = i;
  if (size <= options.max_elements_per_param) return all;
  Rng rng(derive_seed(options.seed, param_index));
  rng.shuffle(std::span<std::size_t>(all));
  all.resize(options.max_elements_per_param);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

double relative_error(double analytic, double numeric, double epsilon) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), epsilon});
  return std::abs(analytic - numeric) / denom;
}

std::vector<Tensor<double>> analytic_gradients(const ScalarFunction& f,
                                               const ParameterSet<double>& params) {
  Tape<double> tape;
  std::vector<Var> vars = tape.parameters(params);
  return tape.backward(f(tape, vars), params.size());
}

GradCheckReport compare_gradients(const ScalarFunction& f, const ParameterSet<double>& params,
                                  std::span<const Tensor<double>> analytic, double tolerance,
                                  const GradCheckOptions& options) {
  if (analytic.size() != params.size()) {
    throw ContractError("compare_gradients: one analytic gradient per parameter expected");
  }
  GradCheckReport report;
  report.tolerance = tolerance;

  std::vector<Tensor<double>> frozen;
  const double base = record(f, params, frozen);
  std::vector<Tensor<double>> again;
  if (record(f, params, again) != base || again != frozen) {
    report.valid = false;
    report.message = "function is not deterministic: two forward passes differ";
    return report;
  }

  ParameterSet<double> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (analytic[p].size() != params.value(p).size()) {
      throw DimensionError("compare_gradients: gradient shape mismatch for " + params.name(p));
    }
    ParamGradCheck check;
    check.name = params.name(p);
    auto values = probe.value(p).data();
    for (std::size_t i : elements_to_check(values.size(), options, p)) {
      const double original = values[i];
      values[i] = original + options.step;
      const double plus = evaluate(f, probe, frozen);
      values[i] = original - options.step;
      const double minus = evaluate(f, probe, frozen);
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = relative_error(analytic[p][i], numeric, options.epsilon);
      if (err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_element = i;
      }
      ++check.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.params.push_back(std::move(check));
  }
  report.passed = report.max_rel_error < tolerance;
  std::ostringstream msg;
  msg << "max relative error " << report.max_rel_error << (report.passed ? " < " : " >= ")
      << tolerance;
  report.message = msg.str();
  return report;
}

GradCheckReport grad_check(const ScalarFunction& f, const ParameterSet<double>& params,
                           double tolerance, const GradCheckOptions& options) {
  const auto analytic = analytic_gradients(f, params);
  return compare_gradients(f, params, analytic, tolerance, options);
}

}  // namespace hit
