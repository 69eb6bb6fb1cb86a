#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hit/model/hit_model.h"
#include "hit/serving/ad_table.h"

namespace hit {

inline constexpr std::uint32_t kCacheVersion = 1;

// Ad head representations keyed by ad id. File layout, little-endian:
// "HITC", u32 version, u32 J, u32 z, u64 count, count x u64 sorted ids,
// count x J x z float32 (head-major per ad).
struct AdCache {
  std::uint32_t version = kCacheVersion;
  std::uint32_t heads = 0;
  std::uint32_t head_dim = 0;
  std::vector<std::uint64_t> ids;
  std::vector<float> block;

  std::size_t size() const { return ids.size(); }
  std::size_t record_length() const { return std::size_t{heads} * head_dim; }
  std::span<const float> record(std::size_t index) const {
    return std::span<const float>(block).subspan(index * record_length(), record_length());
  }
  std::optional<std::size_t> find(std::uint64_t id) const;
};

std::string serialize_cache(const AdCache& cache);
// Throws ServingError for anything that is not a well-formed cache.
AdCache parse_cache(const std::string& bytes);

void write_ad_cache(const AdCache& cache, const std::filesystem::path& path);
AdCache read_ad_cache(const std::filesystem::path& path);

// Runs the full ad tower for every ad. Ads are stored in ascending id order.
// Throws DataError for duplicate ids and SchemaError for a table whose
// columns do not match the model's ad side.
AdCache precompute_ad_cache(const HitModel& model, const EntityTable& ads);

// ServingError unless the cache was produced for this model's shape.
void check_compatible(const HitModel& model, const AdCache& cache);

struct CacheMismatch {
  std::uint64_t user_id = 0;
  std::uint64_t ad_id = 0;
  float cached_score = 0;
  float full_score = 0;
  bool record_differs = false;
};

struct EquivalenceReport {
  std::size_t pairs = 0;
  std::size_t score_mismatches = 0;
  std::size_t record_mismatches = 0;
  std::vector<CacheMismatch> mismatches;  // first 100 offending pairs
  bool passed() const { return pairs > 0 && score_mismatches == 0 && record_mismatches == 0; }
};

// Draws `pairs` (user, ad) pairs with a seeded generator; ads cycle through a
// permutation of the cache, so every cached ad is visited once pairs >= cache
// size. Each pair is scored by the joint training forward on the user's and
// ad's features and by the cached path (user encoder + stored record); both
// the score and the ad representation must agree bit for bit.
EquivalenceReport verify_cache_equivalence(const HitModel& model, const AdCache& cache,
                                           const EntityTable& ads, const EntityTable& users,
                                           std::size_t pairs, std::uint64_t seed);

}  // namespace hit
