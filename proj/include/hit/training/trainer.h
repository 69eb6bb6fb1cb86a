#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hit/data/dataset.h"
#include "hit/model/hit_model.h"
#include "hit/training/adam.h"
#include "hit/training/metrics.h"

namespace hit {

struct TrainOptions {
  AdamHyper adam;
  std::size_t batch_size = 256;
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
  std::string run_id = "run";
  std::string variant = "full";
  // Reference AUC for the rela_impr column; left empty when absent.
  std::optional<double> baseline_auc;
  // When set: checkpoint.json/.bin (best epoch), metrics.csv, and
  // partial.json/.bin if training diverges.
  std::optional<std::filesystem::path> out_dir;
  // Called after every epoch; useful for progress output.
  std::function<void(const MetricsRecord&)> on_epoch;
};

struct EpochLog {
  MetricsRecord metrics;     // held-out AUC / CE loss
  double train_loss = 0.0;   // mean total loss over batches
  double train_ce = 0.0;     // mean cross-entropy over batches
  double train_generation = 0.0;  // mean L_gu + L_ga over batches
};

struct TrainResult {
  HitModel model;  // parameters of the best epoch by held-out AUC
  std::size_t best_epoch = 0;
  std::vector<EpochLog> history;
};

// Parameters are initialized from options.seed; epoch e (1-based) shuffles
// with derive_seed(options.seed, e). Throws DivergenceError when a loss or
// gradient turns non-finite, after writing the last finite parameters as a
// partial checkpoint (if out_dir is set).
TrainResult train(const HitConfig& config, const Dataset& train_set, const Dataset& eval_set,
                  const TrainOptions& options);

// Scores a whole dataset in fixed-size chunks. Rows are independent, so the
// chunking does not affect the values.
std::vector<float> score_dataset(const HitModel& model, const Dataset& dataset);

MetricsRecord evaluate(const HitModel& model, const Dataset& dataset);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const std::string& run_id, const std::string& variant,
                       const MetricsRecord& record);

}  // namespace hit
