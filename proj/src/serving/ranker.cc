#include "hit/serving/ranker.h"

#include <algorithm>
#include <numeric>

#include "hit/error.h"
#include "hit/numerics/kernels.h"

namespace hit {

std::vector<RankedAd> top_k(std::span<const std::uint64_t> ids, std::span<const float> scores,
                            std::size_t k) {
  if (k == 0) throw ServingError("k must be >= 1");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t n = std::min(k, order.size());
  auto better = [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(), better);
  std::vector<RankedAd> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({ids[order[i]], scores[order[i]]});
  return out;
}

Ranker::Ranker(const HitModel& model, const AdCache& cache)
    : model_(model), cache_(cache), users_(model, Side::kUser) {
  check_compatible(model, cache);
}

std::vector<float> Ranker::user_representation(const EntityTable& user) const {
  if (user.size() == 0) throw ServingError("empty user query");
  if (user.side != Side::kUser) throw ServingError("query row is not a user row");
  const auto rep = users_.encode(user.static_ids, user.dynamic_ids);
  const auto row = rep.row(0);
  return std::vector<float>(row.begin(), row.end());
}

std::vector<float> Ranker::score_all(std::span<const float> user_rep) const {
  if (user_rep.size() != cache_.record_length()) {
    throw ServingError("user representation length does not match the cache records");
  }
  std::vector<float> scores(cache_.size());
  for (std::size_t i = 0; i < cache_.size(); ++i) {
    scores[i] = kernels::max_then_sum<float>(user_rep, cache_.record(i), cache_.heads, cache_.head_dim);
  }
  return scores;
}

std::vector<RankedAd> Ranker::rank(const EntityTable& user, std::size_t k,
                                   const std::optional<std::unordered_set<std::uint64_t>>& allow) const {
  if (k == 0) throw ServingError("k must be >= 1");
  const auto rep = user_representation(user);
  if (!allow) {
    const auto scores = score_all(rep);
    return top_k(cache_.ids, scores, k);
  }
  std::vector<std::uint64_t> ids;
  std::vector<float> scores;
  for (std::size_t i = 0; i < cache_.size(); ++i) {
    if (!allow->contains(cache_.ids[i])) continue;
    ids.push_back(cache_.ids[i]);
    scores.push_back(kernels::max_then_sum<float>(rep, cache_.record(i), cache_.heads, cache_.head_dim));
  }
  return top_k(ids, scores, k);
}

}  // namespace hit
