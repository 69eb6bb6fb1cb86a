#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "hit/model/encoder.h"
#include "hit/serving/ad_cache.h"

namespace hit {

struct RankedAd {
  std::uint64_t id = 0;
  float score = 0.0f;
  friend bool operator==(const RankedAd&, const RankedAd&) = default;
};

// The k best of (ids[i], scores[i]): score descending, id ascending on ties.
std::vector<RankedAd> top_k(std::span<const std::uint64_t> ids, std::span<const float> scores,
                            std::size_t k);

// Answers queries against a frozen model and its ad cache. Safe to share
// across threads.
class Ranker {
 public:
  // Throws ServingError when the cache does not belong to the model.
  Ranker(const HitModel& model, const AdCache& cache);

  // Head representation of one user (first row of `user`).
  std::vector<float> user_representation(const EntityTable& user) const;

  // Scores of every cached ad for a user representation, in cache order.
  std::vector<float> score_all(std::span<const float> user_rep) const;

  // Top-k over the cache, optionally restricted to `allow` (ids absent from
  // the cache are ignored). k >= 1.
  std::vector<RankedAd> rank(const EntityTable& user, std::size_t k,
                             const std::optional<std::unordered_set<std::uint64_t>>& allow = {}) const;

  const AdCache& cache() const { return cache_; }

 private:
  const HitModel& model_;
  const AdCache& cache_;
  TowerEncoder users_;
};

}  // namespace hit
