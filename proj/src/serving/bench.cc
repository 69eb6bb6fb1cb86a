#include "hit/serving/bench.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "hit/error.h"
#include "hit/numerics/kernels.h"

namespace hit {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Nearest-rank percentile of sorted values.
double percentile(const std::vector<double>& sorted, double q) {
  const std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::min(sorted.size() - 1, rank == 0 ? 0 : rank - 1)];
}

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Runs fn(q) for q in [0, n) over `workers` threads, each query timed alone.
template <typename Fn>
std::vector<double> timed(std::size_t n, std::size_t workers, Fn fn) {
  std::vector<double> ms(n);
  auto work = [&](std::size_t w) {
    for (std::size_t q = w; q < n; q += workers) {
      const auto start = Clock::now();
      fn(q);
      ms[q] = ms_since(start);
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(work, w);
    for (auto& t : threads) t.join();
  }
  return ms;
}

}  // namespace

nlohmann::json to_json(const BenchReport& r) {
  return {{"queries", r.queries},
          {"candidates", r.candidates},
          {"workers", r.workers},
          {"cached_ms_mean", r.cached_ms_mean},
          {"cached_ms_p50", r.cached_ms_p50},
          {"cached_ms_p99", r.cached_ms_p99},
          {"uncached_ms_mean", r.uncached_ms_mean},
          {"speedup", r.speedup},
          {"uncached_queries", r.uncached_queries},
          {"cached_ad_layer_evaluations", r.cached_ad_layer_evaluations}};
}

BenchReport bench(const HitModel& model, const AdCache& cache, const EntityTable& ads,
                  const BenchOptions& options) {
  if (options.queries == 0 || options.candidates == 0) {
    throw ServingError("bench needs at least one query and one candidate");
  }
  if (cache.size() == 0) throw ServingError("bench needs a non-empty cache");
  const std::size_t workers = std::max<std::size_t>(1, options.workers);
  const Ranker ranker(model, cache);

  // Candidate set: cache positions and the matching ad-table rows.
  std::unordered_map<std::uint64_t, std::size_t> table_row;
  for (std::size_t r = 0; r < ads.size(); ++r) table_row.emplace(ads.ids[r], r);
  std::vector<std::size_t> positions(options.candidates), rows(options.candidates);
  std::vector<std::uint64_t> candidate_ids(options.candidates);
  for (std::size_t c = 0; c < options.candidates; ++c) {
    positions[c] = c % cache.size();
    candidate_ids[c] = cache.ids[positions[c]];
    auto it = table_row.find(candidate_ids[c]);
    if (it == table_row.end()) {
      throw ServingError("cached ad " + std::to_string(candidate_ids[c]) + " is missing from the ad table");
    }
    rows[c] = it->second;
  }
  const EntityTable candidate_features = ads.select(rows);
  const EntityTable users = random_entities(model.schema(), Side::kUser, options.queries, options.seed);

  auto user_row = [&](std::size_t q) { return users.select({q}); };

  const auto layers_before = TowerEncoder::ad_layer_evaluations();
  std::vector<double> cached = timed(options.queries, workers, [&](std::size_t q) {
    const auto rep = ranker.user_representation(user_row(q));
    std::vector<float> scores(options.candidates);
    for (std::size_t c = 0; c < options.candidates; ++c) {
      scores[c] = kernels::max_then_sum<float>(rep, cache.record(positions[c]), cache.heads, cache.head_dim);
    }
    volatile auto best = top_k(candidate_ids, scores, options.k).front().score;
    (void)best;
  });
  const auto cached_layers = TowerEncoder::ad_layer_evaluations() - layers_before;

  const TowerEncoder ad_encoder(model, Side::kAd);
  const std::size_t uncached_n = std::max<std::size_t>(1, std::min(options.queries, options.uncached_queries));
  std::vector<double> uncached = timed(uncached_n, workers, [&](std::size_t q) {
    const auto rep = ranker.user_representation(user_row(q));
    const auto ad_rep = ad_encoder.encode(candidate_features.static_ids, candidate_features.dynamic_ids);
    std::vector<float> scores(options.candidates);
    for (std::size_t c = 0; c < options.candidates; ++c) {
      scores[c] = kernels::max_then_sum<float>(rep, ad_rep.row(c), cache.heads, cache.head_dim);
    }
    volatile auto best = top_k(candidate_ids, scores, options.k).front().score;
    (void)best;
  });

  BenchReport r;
  r.queries = options.queries;
  r.candidates = options.candidates;
  r.workers = workers;
  r.uncached_queries = uncached_n;
  r.cached_ad_layer_evaluations = cached_layers;
  r.cached_ms_mean = mean(cached);
  std::sort(cached.begin(), cached.end());
  r.cached_ms_p50 = percentile(cached, 0.50);
  r.cached_ms_p99 = percentile(cached, 0.99);
  r.uncached_ms_mean = mean(uncached);
  r.speedup = r.cached_ms_mean > 0 ? r.uncached_ms_mean / r.cached_ms_mean : 0.0;
  return r;
}

}  // namespace hit
