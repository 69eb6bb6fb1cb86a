#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hit/model/config.h"
#include "hit/training/adam.h"
#include "hit/training/trainer.h"
#include "json.hpp"

namespace hit {

// Everything a run needs, as one flat JSON object: the model keys of
// HitConfig plus the optimizer, schedule, seeds and paths below. Unknown keys
// are errors.
struct RunConfig {
  HitConfig model;
  AdamHyper adam;
  std::size_t batch_size = 256;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;                          // train
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};  // ablate
  std::optional<double> baseline_auc;              // rela_impr reference
  std::string data_dir;                            // default for --data
  std::string out_dir;                             // default for --out

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);

  TrainOptions train_options() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Reads and validates a config file. IoError when unreadable, ConfigError
// (with the key path) for malformed JSON, unknown keys, type mismatches,
// violated invariants, or a data_dir that does not exist.
RunConfig parse_config(const std::filesystem::path& path);

}  // namespace hit
