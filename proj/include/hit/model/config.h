#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace hit {

enum class DistanceMetric { kCosine, kMse, kMae };

std::string metric_name(DistanceMetric metric);
DistanceMetric parse_metric(const std::string& name);  // throws ConfigError

enum class GeneratorRole { kTarget = 0, kNonTarget = 1 };

struct HitConfig {
  std::size_t embedding_dim = 32;                      // d
  std::vector<std::size_t> tower_widths{300, 300, 32};  // last entry is d_L
  std::vector<std::size_t> generator_widths{64, 32};   // hidden layers before the p-wide output
  std::size_t num_generators = 2;                      // K
  std::size_t num_heads = 2;                           // J
  std::size_t head_dim = 16;                           // z
  double alpha = 1e-3;
  DistanceMetric distance_metric = DistanceMetric::kCosine;
  bool use_generators = true;
  bool use_representers = true;
  bool use_target_gen = true;
  bool use_non_target_gen = true;
  bool generators_use_dynamic = false;

  std::size_t output_dim() const { return tower_widths.back(); }
  // Width of the compared representation and of every mimic vector: z*J with
  // representers, the tower output width without them.
  std::size_t mimic_dim() const {
    return use_representers ? head_dim * num_heads : output_dim();
  }
  // Generator 1 (target) exists when K >= 1, generator 2 (non-target) when K >= 2.
  bool has_generator(GeneratorRole role) const;
  std::size_t active_generators() const;

  // Throws ConfigError describing the first violated invariant.
  void validate() const;

  nlohmann::json to_json() const;
  // Strict: unknown keys and type mismatches are errors.
  static HitConfig from_json(const nlohmann::json& j);

  friend bool operator==(const HitConfig&, const HitConfig&) = default;
};

// Reads keys of a JSON object with type checking, remembering which keys were
// consumed so that finish() can reject everything else. Error messages carry
// the key path.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string path);

  bool has(const std::string& key) const { return json_.contains(key); }
  std::string path(const std::string& key) const;

  void read(const std::string& key, bool& out);
  void read(const std::string& key, double& out);
  void read(const std::string& key, std::size_t& out);
  void read_u64(const std::string& key, std::uint64_t& out);
  void read(const std::string& key, std::string& out);
  void read(const std::string& key, std::vector<std::size_t>& out);
  void read_u64_list(const std::string& key, std::vector<std::uint64_t>& out);

  void finish() const;

 private:
  const nlohmann::json& field(const std::string& key);

  const nlohmann::json& json_;
  std::string path_;
  std::set<std::string> consumed_;
};

// Reads the HitConfig keys present in `object` on top of defaults. Does not
// call finish(); the caller decides which other keys are legal.
HitConfig read_hit_config(StrictObject& object);

}  // namespace hit
