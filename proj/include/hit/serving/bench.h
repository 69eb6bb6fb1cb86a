#pragma once

#include <cstdint>

#include "hit/serving/ranker.h"
#include "json.hpp"

namespace hit {

struct BenchOptions {
  std::size_t queries = 100;
  std::size_t candidates = 1000;
  std::size_t workers = 1;
  std::size_t k = 100;
  std::uint64_t seed = 0;
  // The uncached path runs the whole ad tower per candidate and is slow;
  // it is timed on the first min(queries, uncached_queries) queries.
  std::size_t uncached_queries = 10;
};

struct BenchReport {
  std::size_t queries = 0;
  std::size_t candidates = 0;
  std::size_t workers = 0;
  double cached_ms_mean = 0;
  double cached_ms_p50 = 0;
  double cached_ms_p99 = 0;
  double uncached_ms_mean = 0;
  double speedup = 0;
  std::size_t uncached_queries = 0;
  std::uint64_t cached_ad_layer_evaluations = 0;  // must stay 0
};

nlohmann::json to_json(const BenchReport& report);

// Candidates are the first `candidates` cached ads (cycling when the cache is
// smaller); their raw features come from `ads`. Users are random feature rows
// drawn from the schema with `seed`. Both paths score every candidate and
// take the top k.
BenchReport bench(const HitModel& model, const AdCache& cache, const EntityTable& ads,
                  const BenchOptions& options);

}  // namespace hit
