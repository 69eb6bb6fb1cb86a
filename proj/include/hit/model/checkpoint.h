#pragma once

#include <filesystem>

#include "hit/model/hit_model.h"
#include "json.hpp"

namespace hit {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  HitModel model;
  nlohmann::json info;  // free-form run metadata (epoch, seed, metrics)
};

// Writes <path> (JSON manifest) and <path without extension>.bin (parameters
// as little-endian float32 in manifest order). Output is a pure function of
// the inputs.
void save_checkpoint(const HitModel& model, const std::filesystem::path& path,
                     const nlohmann::json& info = nlohmann::json::object());

// Throws IoError for unreadable files and ConfigError/DimensionError for
// manifests that disagree with their blob or with themselves.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hit
