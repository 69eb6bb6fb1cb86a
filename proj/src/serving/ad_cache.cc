#include "hit/serving/ad_cache.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "hit/error.h"
#include "hit/model/encoder.h"
#include "hit/model/forward.h"
#include "hit/numerics/kernels.h"
#include "hit/numerics/random.h"

namespace hit {

namespace {

constexpr char kMagic[4] = {'H', 'I', 'T', 'C'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 4 + 8;
constexpr std::size_t kEncodeChunk = 4096;

template <typename U>
void put(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

template <typename U>
U get(const std::string& in, std::size_t& pos) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return v;
}

void check_table(const HitModel& model, const EntityTable& t, Side side) {
  const auto& tower = model.layout().tower(side);
  if (t.side != side || t.static_ids.cols() != tower.static_tables.size() ||
      t.dynamic_ids.cols() != tower.dynamic_tables.size()) {
    throw SchemaError(side_name(side) + " table columns do not match the checkpoint schema");
  }
}

// Representations of all rows of `t`, encoded chunk by chunk.
std::vector<float> encode_rows(const HitModel& model, const EntityTable& t) {
  const TowerEncoder encoder(model, t.side);
  std::vector<float> out;
  for (std::size_t start = 0; start < t.size(); start += kEncodeChunk) {
    std::vector<std::size_t> rows(std::min(kEncodeChunk, t.size() - start));
    std::iota(rows.begin(), rows.end(), start);
    const EntityTable chunk = t.select(rows);
    const auto rep = encoder.encode(chunk.static_ids, chunk.dynamic_ids);
    out.insert(out.end(), rep.data().begin(), rep.data().end());
  }
  return out;
}

bool same_bits(float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); }

}  // namespace

std::optional<std::size_t> AdCache::find(std::uint64_t id) const {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

std::string serialize_cache(const AdCache& cache) {
  if (cache.block.size() != cache.size() * cache.record_length()) {
    throw ServingError("cache block length does not match count x J x z");
  }
  std::string out(kMagic, 4);
  out.reserve(kHeaderBytes + cache.size() * 8 + cache.block.size() * 4);
  put<std::uint32_t>(out, cache.version);
  put<std::uint32_t>(out, cache.heads);
  put<std::uint32_t>(out, cache.head_dim);
  put<std::uint64_t>(out, cache.ids.size());
  for (std::uint64_t id : cache.ids) put<std::uint64_t>(out, id);
  for (float v : cache.block) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

AdCache parse_cache(const std::string& bytes) {
  if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ServingError("not an ad cache (bad magic or truncated header)");
  }
  std::size_t pos = 4;
  AdCache cache;
  cache.version = get<std::uint32_t>(bytes, pos);
  cache.heads = get<std::uint32_t>(bytes, pos);
  cache.head_dim = get<std::uint32_t>(bytes, pos);
  const auto count = get<std::uint64_t>(bytes, pos);
  if (cache.version != kCacheVersion) {
    throw ServingError("unsupported cache version " + std::to_string(cache.version));
  }
  if (cache.heads == 0 || cache.head_dim == 0) throw ServingError("cache header has J or z of 0");
  const std::size_t record = cache.record_length();
  if (count > (bytes.size() - kHeaderBytes) / 8 ||
      bytes.size() != kHeaderBytes + count * 8 + count * record * 4) {
    throw ServingError("cache size " + std::to_string(bytes.size()) +
                       " bytes does not match its header");
  }
  cache.ids.resize(count);
  for (auto& id : cache.ids) id = get<std::uint64_t>(bytes, pos);
  for (std::size_t i = 1; i < cache.ids.size(); ++i) {
    if (cache.ids[i] <= cache.ids[i - 1]) throw ServingError("cache ids are not strictly ascending");
  }
  cache.block.resize(count * record);
  for (float& v : cache.block) v = std::bit_cast<float>(get<std::uint32_t>(bytes, pos));
  return cache;
}

void write_ad_cache(const AdCache& cache, const std::filesystem::path& path) {
  const std::string bytes = serialize_cache(cache);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

AdCache read_ad_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_cache(ss.str());
}

AdCache precompute_ad_cache(const HitModel& model, const EntityTable& ads) {
  check_table(model, ads, Side::kAd);
  std::vector<std::size_t> order(ads.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ads.ids[a] < ads.ids[b]; });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (ads.ids[order[i]] == ads.ids[order[i - 1]]) {
      throw DataError("ad table", 0, "duplicate ad id " + std::to_string(ads.ids[order[i]]));
    }
  }
  const EntityTable sorted = ads.select(order);
  AdCache cache;
  cache.heads = static_cast<std::uint32_t>(model.heads());
  cache.head_dim = static_cast<std::uint32_t>(model.head_dim());
  cache.ids = sorted.ids;
  cache.block = encode_rows(model, sorted);
  return cache;
}

void check_compatible(const HitModel& model, const AdCache& cache) {
  if (cache.version != kCacheVersion) {
    throw ServingError("cache version " + std::to_string(cache.version) + " is not supported");
  }
  if (cache.heads != model.heads() || cache.head_dim != model.head_dim()) {
    throw ServingError("cache holds J=" + std::to_string(cache.heads) + ", z=" +
                       std::to_string(cache.head_dim) + " records but the checkpoint produces J=" +
                       std::to_string(model.heads()) + ", z=" + std::to_string(model.head_dim()));
  }
}

EquivalenceReport verify_cache_equivalence(const HitModel& model, const AdCache& cache,
                                           const EntityTable& ads, const EntityTable& users,
                                           std::size_t pairs, std::uint64_t seed) {
  check_compatible(model, cache);
  check_table(model, ads, Side::kAd);
  check_table(model, users, Side::kUser);
  if (cache.size() == 0 || users.size() == 0) throw ServingError("nothing to verify");

  std::vector<std::size_t> ad_row_of(cache.size());
  {
    std::vector<std::size_t> order(ads.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ads.ids[a] < ads.ids[b]; });
    for (std::size_t i = 0; i < cache.size(); ++i) {
      auto it = std::lower_bound(order.begin(), order.end(), cache.ids[i],
                                 [&](std::size_t r, std::uint64_t id) { return ads.ids[r] < id; });
      if (it == order.end() || ads.ids[*it] != cache.ids[i]) {
        throw ServingError("cached ad " + std::to_string(cache.ids[i]) + " is missing from the ad table");
      }
      ad_row_of[i] = *it;
    }
  }

  Rng rng(seed);
  std::vector<std::size_t> ad_cycle(cache.size());
  std::iota(ad_cycle.begin(), ad_cycle.end(), 0);
  rng.shuffle(std::span<std::size_t>(ad_cycle));
  std::vector<std::size_t> pair_user(pairs), pair_ad(pairs);
  for (std::size_t p = 0; p < pairs; ++p) {
    pair_user[p] = rng.uniform_index(users.size());
    pair_ad[p] = ad_cycle[p % ad_cycle.size()];
  }

  // Joint forward on the pairs as training would run it.
  EncodedBatch batch;
  const EntityTable pu = users.select(pair_user);
  std::vector<std::size_t> ad_rows(pairs);
  for (std::size_t p = 0; p < pairs; ++p) ad_rows[p] = ad_row_of[pair_ad[p]];
  const EntityTable pa = ads.select(ad_rows);
  batch.user_static = pu.static_ids;
  batch.user_dynamic = pu.dynamic_ids;
  batch.ad_static = pa.static_ids;
  batch.ad_dynamic = pa.dynamic_ids;
  batch.labels.assign(pairs, 0.0f);
  Tape<float> tape;
  const auto vars = tape.constants(model.params());
  const auto trace = forward(tape, model.config(), model.layout(), std::span<const Var>(vars), batch);
  const auto& full_scores = tape.value(trace.scores);
  const auto& full_ad_rep = tape.value(trace.ad.representation);

  // Cached path: user encoder + stored records.
  const auto user_rep = TowerEncoder(model, Side::kUser).encode(pu.static_ids, pu.dynamic_ids);

  EquivalenceReport report;
  report.pairs = pairs;
  for (std::size_t p = 0; p < pairs; ++p) {
    const auto record = cache.record(pair_ad[p]);
    const float cached = kernels::max_then_sum<float>(user_rep.row(p), record, cache.heads, cache.head_dim);
    const float full = full_scores[p];
    bool record_differs = false;
    for (std::size_t k = 0; k < record.size(); ++k) {
      record_differs = record_differs || !same_bits(record[k], full_ad_rep(p, k));
    }
    const bool score_differs = !same_bits(cached, full) && cached != full;
    report.score_mismatches += score_differs;
    report.record_mismatches += record_differs;
    if ((score_differs || record_differs) && report.mismatches.size() < 100) {
      report.mismatches.push_back({pu.ids[0 + p], cache.ids[pair_ad[p]], cached, full, record_differs});
    }
  }
  return report;
}

}  // namespace hit
