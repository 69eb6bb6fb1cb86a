#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

namespace hit {

struct MovieLensOptions {
  double train_ratio = 0.8;
  std::uint64_t split_seed = 2024;
  // Also emit raw user and movie ids as static features.
  bool include_ids = false;
};

struct MovieLensSummary {
  std::string format;  // "ml-1m" or "ml-100k"
  std::size_t users = 0;    // user id space (largest user id)
  std::size_t items = 0;    // movie id space (largest movie id)
  std::size_t ratings = 0;
  std::size_t positives = 0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
};

// Label threshold: ratings at or above this value are positives.
inline constexpr int kPositiveRating = 4;

// Converts a MovieLens directory (ML-1M: ratings.dat/users.dat/movies.dat, or
// ML-100K: u.data/u.user/u.item) into the canonical layout under `out_dir`:
//
//   schema.json  feature schema with measured cardinalities
//   train.csv    canonical CSV, train portion of a seeded split
//   test.csv     canonical CSV, held-out portion
//   users.csv    user_id,<user fields>  one row per user
//   ads.csv      ad_id,<ad fields>      one row per movie
//
// Dynamic features (user activity decile, movie popularity decile) are
// measured on the train portion only.
MovieLensSummary adapt_movielens(const std::filesystem::path& source_dir,
                                 const std::filesystem::path& out_dir,
                                 const MovieLensOptions& options = {});

}  // namespace hit
