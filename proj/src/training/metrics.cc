#include "hit/training/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hit/error.h"

namespace hit {

namespace {

template <typename T>
double auc_impl(std::span<const T> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw MetricError("auc: " + std::to_string(scores.size()) + " scores for " +
                      std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  for (T s : scores) {
    if (!std::isfinite(s)) throw MetricError("auc: non-finite score");
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the Mann-Whitney U in integers: each positive earns 2 per negative
  // ranked strictly below it and 1 per negative tied with it.
  std::uint64_t twice_u = 0, positives = 0, negatives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t p = 0, n = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] > 1) throw MetricError("auc: labels must be 0 or 1");
      (labels[order[j]] ? p : n) += 1;
      ++j;
    }
    twice_u += p * (2 * negatives + n);
    positives += p;
    negatives += n;
    i = j;
  }
  if (positives == 0 || negatives == 0) {
    throw MetricError("auc is undefined without both positive and negative samples");
  }
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(positives) *
                                         static_cast<double>(negatives));
}

}  // namespace

double auc(std::span<const float> scores, std::span<const std::uint8_t> labels) {
  return auc_impl(scores, labels);
}

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  return auc_impl(scores, labels);
}

double log_loss(std::span<const float> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw MetricError("log_loss: need equally many scores and labels, at least one");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double x = scores[i];
    // -[y log s(x) + (1-y) log(1-s(x))] = max(x,0) - x*y + log(1 + exp(-|x|))
    total += std::max(x, 0.0) - x * labels[i] + std::log1p(std::exp(-std::abs(x)));
  }
  return total / static_cast<double>(scores.size());
}

double rela_impr(double auc_model, double auc_base) {
  if (std::abs(auc_base - 0.5) < 1e-12) {
    throw MetricError("rela_impr: baseline AUC of 0.5 leaves nothing to improve on");
  }
  return ((auc_model - 0.5) / (auc_base - 0.5) - 1.0) * 100.0;
}

}  // namespace hit
