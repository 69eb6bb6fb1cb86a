#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace hit {

// Mann-Whitney AUC; a tied positive/negative pair counts one half.
// Throws MetricError unless both classes are present.
double auc(std::span<const float> scores, std::span<const std::uint8_t> labels);
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Mean binary cross-entropy of sigmoid(score), computed in 64-bit logit form.
double log_loss(std::span<const float> scores, std::span<const std::uint8_t> labels);

// ((auc_model - 0.5) / (auc_base - 0.5) - 1) * 100. MetricError when auc_base is 0.5.
double rela_impr(double auc_model, double auc_base);

struct MetricsRecord {
  double auc = 0.0;
  double celoss = 0.0;
  std::optional<double> rela_impr;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
};

}  // namespace hit
