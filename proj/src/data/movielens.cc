#include "hit/data/movielens.h"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <string_view>
#include <vector>

#include "hit/data/dataset.h"
#include "hit/error.h"

namespace hit {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::string_view, 19> kGenres = {
    "unknown", "Action",    "Adventure", "Animation", "Children's", "Comedy", "Crime",
    "Documentary", "Drama", "Fantasy",   "Film-Noir", "Horror",     "Musical", "Mystery",
    "Romance", "Sci-Fi",    "Thriller",  "War",       "Western"};

struct Rating {
  std::uint32_t user;
  std::uint32_t movie;
  int stars;
};

struct UserInfo {
  std::uint32_t gender = 0;
  std::uint32_t age_bucket = 0;
  std::uint32_t occupation = 0;
};

struct MovieInfo {
  std::uint32_t genre = 0;
  std::uint32_t year_bucket = 0;
};

struct RawData {
  std::string format;
  std::map<std::uint32_t, UserInfo> users;
  std::map<std::uint32_t, MovieInfo> movies;
  std::vector<Rating> ratings;
};

std::vector<std::string_view> split_on(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

long parse_int(std::string_view s, const fs::path& file, std::size_t line) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError(file.string(), line, "expected integer, got '" + std::string(s) + "'");
  }
  return v;
}

template <typename Fn>
void for_each_line(const fs::path& file, Fn fn) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("movielens adapter: cannot open " + file.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(std::string_view(line), line_no);
  }
}

// Age groups of the ML-1M documentation: <18, 18-24, 25-34, 35-44, 45-49,
// 50-55, 56+. ML-1M stores each group's lower bound, so raw ML-100K ages and
// ML-1M codes map through the same thresholds.
std::uint32_t age_bucket(long age) {
  constexpr std::array<long, 6> bounds = {18, 25, 35, 45, 50, 56};
  std::uint32_t bucket = 0;
  for (long b : bounds) {
    if (age >= b) ++bucket;
  }
  return bucket;
}

// 0 unknown, then <1960, 1960s, 1970s, 1980s, 1990-94, 1995-99, 2000+.
std::uint32_t year_bucket(long year) {
  if (year <= 0) return 0;
  if (year < 1960) return 1;
  if (year < 1970) return 2;
  if (year < 1980) return 3;
  if (year < 1990) return 4;
  if (year < 1995) return 5;
  if (year < 2000) return 6;
  return 7;
}

std::uint32_t genre_index(std::string_view name) {
  for (std::size_t i = 0; i < kGenres.size(); ++i) {
    if (kGenres[i] == name) return static_cast<std::uint32_t>(i);
  }
  return 0;
}

// Trailing "(YYYY)" of an ML-1M title; 0 when absent.
long year_from_title(std::string_view title) {
  auto open = title.rfind('(');
  if (open == std::string_view::npos || title.size() < open + 6) return 0;
  long y = 0;
  auto digits = title.substr(open + 1, 4);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), y);
  return (ec == std::errc() && ptr == digits.data() + digits.size()) ? y : 0;
}

RawData read_ml1m(const fs::path& dir) {
  RawData raw;
  raw.format = "ml-1m";
  for_each_line(dir / "users.dat", [&](std::string_view line, std::size_t n) {
    auto f = split_on(line, "::");
    if (f.size() < 4) throw DataError((dir / "users.dat").string(), n, "expected 5 fields");
    UserInfo u;
    u.gender = f[1] == "F" ? 0 : 1;
    u.age_bucket = age_bucket(parse_int(f[2], dir / "users.dat", n));
    u.occupation = static_cast<std::uint32_t>(parse_int(f[3], dir / "users.dat", n));
    raw.users[static_cast<std::uint32_t>(parse_int(f[0], dir / "users.dat", n))] = u;
  });
  for_each_line(dir / "movies.dat", [&](std::string_view line, std::size_t n) {
    auto f = split_on(line, "::");
    if (f.size() < 3) throw DataError((dir / "movies.dat").string(), n, "expected 3 fields");
    MovieInfo m;
    m.genre = genre_index(split_on(f[2], "|").front());
    m.year_bucket = year_bucket(year_from_title(f[1]));
    raw.movies[static_cast<std::uint32_t>(parse_int(f[0], dir / "movies.dat", n))] = m;
  });
  for_each_line(dir / "ratings.dat", [&](std::string_view line, std::size_t n) {
    auto f = split_on(line, "::");
    if (f.size() < 3) throw DataError((dir / "ratings.dat").string(), n, "expected 4 fields");
    raw.ratings.push_back({static_cast<std::uint32_t>(parse_int(f[0], dir / "ratings.dat", n)),
                           static_cast<std::uint32_t>(parse_int(f[1], dir / "ratings.dat", n)),
                           static_cast<int>(parse_int(f[2], dir / "ratings.dat", n))});
  });
  return raw;
}

RawData read_ml100k(const fs::path& dir) {
  RawData raw;
  raw.format = "ml-100k";
  std::vector<std::pair<std::uint32_t, std::string>> occupations;
  std::vector<std::string> names;
  for_each_line(dir / "u.user", [&](std::string_view line, std::size_t n) {
    auto f = split_on(line, "|");
    if (f.size() < 4) throw DataError((dir / "u.user").string(), n, "expected 5 fields");
    const auto id = static_cast<std::uint32_t>(parse_int(f[0], dir / "u.user", n));
    UserInfo u;
    u.age_bucket = age_bucket(parse_int(f[1], dir / "u.user", n));
    u.gender = f[2] == "F" ? 0 : 1;
    raw.users[id] = u;
    occupations.emplace_back(id, std::string(f[3]));
    names.emplace_back(f[3]);
  });
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  for (const auto& [id, name] : occupations) {
    raw.users[id].occupation = static_cast<std::uint32_t>(
        std::lower_bound(names.begin(), names.end(), name) - names.begin());
  }
  for_each_line(dir / "u.item", [&](std::string_view line, std::size_t n) {
    auto f = split_on(line, "|");
    if (f.size() < 5 + kGenres.size()) {
      throw DataError((dir / "u.item").string(), n, "expected 24 fields");
    }
    MovieInfo m;
    for (std::size_t g = 0; g < kGenres.size(); ++g) {
      if (f[5 + g] == "1") {
        m.genre = static_cast<std::uint32_t>(g);
        break;
      }
    }
    // Release date looks like 01-Jan-1995.
    long year = 0;
    if (f[2].size() >= 4) {
      auto digits = f[2].substr(f[2].size() - 4);
      std::from_chars(digits.data(), digits.data() + 4, year);
    }
    m.year_bucket = year_bucket(year);
    raw.movies[static_cast<std::uint32_t>(parse_int(f[0], dir / "u.item", n))] = m;
  });
  for_each_line(dir / "u.data", [&](std::string_view line, std::size_t n) {
    auto f = split_on(line, "\t");
    if (f.size() < 3) throw DataError((dir / "u.data").string(), n, "expected 4 fields");
    raw.ratings.push_back({static_cast<std::uint32_t>(parse_int(f[0], dir / "u.data", n)),
                           static_cast<std::uint32_t>(parse_int(f[1], dir / "u.data", n)),
                           static_cast<int>(parse_int(f[2], dir / "u.data", n))});
  });
  return raw;
}

// Decile (0..9) of each key's count among all keys: the share of keys with a
// strictly smaller count, scaled to ten buckets. Equal counts share a decile.
std::map<std::uint32_t, std::uint32_t> count_deciles(
    const std::map<std::uint32_t, std::size_t>& counts) {
  std::vector<std::size_t> sorted;
  for (const auto& [key, c] : counts) sorted.push_back(c);
  std::sort(sorted.begin(), sorted.end());
  std::map<std::uint32_t, std::uint32_t> deciles;
  const std::size_t n = sorted.size();
  for (const auto& [key, c] : counts) {
    const auto below = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), c) - sorted.begin());
    deciles[key] = static_cast<std::uint32_t>(std::min<std::size_t>(9, below * 10 / n));
  }
  return deciles;
}

std::uint32_t measured(std::uint32_t max_id) { return max_id + 1; }

}  // namespace

MovieLensSummary adapt_movielens(const fs::path& source_dir, const fs::path& out_dir,
                                 const MovieLensOptions& options) {
  RawData raw;
  if (fs::exists(source_dir / "ratings.dat")) {
    raw = read_ml1m(source_dir);
  } else if (fs::exists(source_dir / "u.data")) {
    raw = read_ml100k(source_dir);
  } else {
    throw IoError("movielens adapter: " + source_dir.string() +
                  " holds neither ratings.dat (ML-1M) nor u.data (ML-100K)");
  }
  if (raw.ratings.empty()) throw IoError("movielens adapter: no ratings found");
  for (const Rating& r : raw.ratings) {
    if (!raw.users.count(r.user) || !raw.movies.count(r.movie)) {
      throw IoError("movielens adapter: rating references unknown user " +
                    std::to_string(r.user) + " or movie " + std::to_string(r.movie));
    }
  }

  auto [train_idx, test_idx] =
      split_indices(raw.ratings.size(), options.train_ratio, options.split_seed);

  std::map<std::uint32_t, std::size_t> user_counts, movie_counts;
  for (const auto& [id, info] : raw.users) user_counts[id] = 0;
  for (const auto& [id, info] : raw.movies) movie_counts[id] = 0;
  for (std::size_t i : train_idx) {
    ++user_counts[raw.ratings[i].user];
    ++movie_counts[raw.ratings[i].movie];
  }
  auto activity = count_deciles(user_counts);
  auto popularity = count_deciles(movie_counts);

  // Per-entity feature rows in block order.
  std::map<std::uint32_t, std::vector<std::uint32_t>> user_rows, movie_rows;
  for (const auto& [id, u] : raw.users) {
    std::vector<std::uint32_t> row;
    if (options.include_ids) row.push_back(id);
    row.insert(row.end(), {u.gender, u.age_bucket, u.occupation, activity[id]});
    user_rows[id] = std::move(row);
  }
  for (const auto& [id, m] : raw.movies) {
    std::vector<std::uint32_t> row;
    if (options.include_ids) row.push_back(id);
    row.insert(row.end(), {m.genre, m.year_bucket, popularity[id]});
    movie_rows[id] = std::move(row);
  }

  std::vector<std::string> user_names, movie_names;
  if (options.include_ids) user_names.push_back("user_id");
  user_names.insert(user_names.end(), {"gender", "age_bucket", "occupation", "activity_decile"});
  if (options.include_ids) movie_names.push_back("movie_id");
  movie_names.insert(movie_names.end(), {"primary_genre", "release_year_bucket", "popularity_decile"});

  auto max_column = [](const std::map<std::uint32_t, std::vector<std::uint32_t>>& rows,
                       std::size_t c) {
    std::uint32_t m = 0;
    for (const auto& [id, row] : rows) m = std::max(m, row[c]);
    return m;
  };
  std::vector<FeatureField> fields;
  const std::size_t user_width = user_names.size(), movie_width = movie_names.size();
  for (std::size_t c = 0; c < user_width; ++c) {
    const auto block = c + 1 == user_width ? FeatureBlock::kUserDynamic : FeatureBlock::kUserStatic;
    fields.push_back({user_names[c], block, measured(max_column(user_rows, c))});
  }
  for (std::size_t c = 0; c < movie_width; ++c) {
    const auto block = c + 1 == movie_width ? FeatureBlock::kAdDynamic : FeatureBlock::kAdStatic;
    fields.push_back({movie_names[c], block, measured(max_column(movie_rows, c))});
  }
  FeatureSchema schema(std::move(fields));

  auto make_dataset = [&](const std::vector<std::size_t>& indices) {
    Dataset d{schema, {}};
    d.samples.reserve(indices.size());
    for (std::size_t i : indices) {
      const Rating& r = raw.ratings[i];
      Sample s;
      s.ids = user_rows[r.user];
      const auto& m = movie_rows[r.movie];
      s.ids.insert(s.ids.end(), m.begin(), m.end());
      s.label = r.stars >= kPositiveRating ? 1 : 0;
      d.samples.push_back(std::move(s));
    }
    return d;
  };

  fs::create_directories(out_dir);
  save_schema(schema, out_dir / "schema.json");
  Dataset train = make_dataset(train_idx);
  Dataset test = make_dataset(test_idx);
  write_canonical_csv(train, out_dir / "train.csv");
  write_canonical_csv(test, out_dir / "test.csv");

  auto write_table = [](const fs::path& path, const std::string& id_column,
                        const std::vector<std::string>& names,
                        const std::map<std::uint32_t, std::vector<std::uint32_t>>& rows) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << id_column;
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (const auto& [id, row] : rows) {
      out << id;
      for (std::uint32_t v : row) out << ',' << v;
      out << '\n';
    }
  };
  write_table(out_dir / "users.csv", "user_id", user_names, user_rows);
  write_table(out_dir / "ads.csv", "ad_id", movie_names, movie_rows);

  MovieLensSummary summary;
  summary.format = raw.format;
  summary.users = raw.users.rbegin()->first;
  summary.items = raw.movies.rbegin()->first;
  summary.ratings = raw.ratings.size();
  for (const Rating& r : raw.ratings) summary.positives += r.stars >= kPositiveRating ? 1 : 0;
  summary.train_samples = train.size();
  summary.test_samples = test.size();
  return summary;
}

}  // namespace hit
