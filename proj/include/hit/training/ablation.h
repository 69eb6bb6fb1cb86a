#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hit/data/dataset.h"
#include "hit/model/config.h"
#include "hit/training/trainer.h"

namespace hit {

// A: generators/representers, B: target/non-target generators, C: dynamic
// generator input, D: generation-loss metric, J: head count 1..6.
enum class Panel { kA, kB, kC, kD, kJ };

std::string panel_name(Panel panel);
Panel parse_panel(const std::string& name);  // ConfigError for anything else

struct AblationVariant {
  std::string name;
  HitConfig config;
};

// Variants in table order; the first one of A-D is the full model.
std::vector<AblationVariant> panel_variants(Panel panel, const HitConfig& base);

struct AblationRow {
  std::string panel;
  std::string variant;
  std::uint64_t seed = 0;
  double auc = 0.0;
  double celoss = 0.0;
};

struct AblationSummary {
  std::string panel;
  std::string variant;
  std::size_t seeds = 0;
  double mean_auc = 0.0;
  double mean_celoss = 0.0;
};

// Trains every variant under every seed (variant-major order) and records the
// best-epoch held-out metrics. `options.seed`, run_id, variant and out_dir are
// overridden per run; when out_dir is set each run writes to
// <out_dir>/<panel>/<variant>/seed-<n>.
std::vector<AblationRow> run_ablation(const HitConfig& base, const Dataset& train_set,
                                      const Dataset& eval_set, Panel panel,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainOptions& options,
                                      const std::function<void(const AblationRow&)>& on_row = {});

// Means per variant, in first-appearance order.
std::vector<AblationSummary> summarize(const std::vector<AblationRow>& rows);

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);
void write_summary_csv(const std::vector<AblationSummary>& summary,
                       const std::filesystem::path& path);

}  // namespace hit
