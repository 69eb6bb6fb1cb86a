#include "hit/cli/commands.h"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "CLI11.hpp"
#include "hit/cli/run_config.h"
#include "hit/data/dataset.h"
#include "hit/data/movielens.h"
#include "hit/data/schema.h"
#include "hit/error.h"
#include "hit/model/checkpoint.h"
#include "hit/serving/ad_cache.h"
#include "hit/serving/bench.h"
#include "hit/serving/ranker.h"
#include "hit/training/ablation.h"
#include "hit/training/trainer.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace hit {
namespace {

struct DataDir {
  FeatureSchema schema;
  Dataset train;
  Dataset test;
};

DataDir load_data_dir(const fs::path& dir, bool need_train = true) {
  if (!fs::is_directory(dir)) throw IoError("data directory " + dir.string() + " does not exist");
  DataDir d;
  d.schema = load_schema(dir / "schema.json");
  if (need_train) d.train = load_canonical_csv(dir / "train.csv", d.schema);
  d.test = load_canonical_csv(dir / "test.csv", d.schema);
  return d;
}

// Flag value, then config value, else error.
fs::path pick_path(const std::string& flag, const std::string& from_config, const char* what) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  throw ConfigError(std::string("missing ") + what + " (flag or config)");
}

RunConfig load_run_config(const std::string& path) {
  return path.empty() ? RunConfig{} : parse_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json metrics_json(const MetricsRecord& m) {
  json j{{"epoch", m.epoch}, {"auc", m.auc}, {"celoss", m.celoss}};
  if (m.rela_impr) j["rela_impr"] = *m.rela_impr;
  return j;
}

void progress(std::ostream& err, const std::string& tag, const MetricsRecord& m) {
  err << tag << " epoch " << m.epoch << " auc " << m.auc << " celoss " << m.celoss << "\n";
}

std::unordered_set<std::uint64_t> parse_id_list(const std::string& text) {
  std::unordered_set<std::uint64_t> ids;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      ids.insert(v);
    } catch (const std::exception&) {
      throw ConfigError("--allow: '" + cell + "' is not an id");
    }
  }
  return ids;
}

fs::path sidecar_path(const fs::path& cache) { return fs::path(cache.string() + ".ads.csv"); }

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"HIT two-tower pre-ranking toolkit", "hit"};
  app.require_subcommand(1);

  // prepare-data
  std::string ml_dir, prep_out;
  MovieLensOptions ml;
  auto* prep = app.add_subcommand("prepare-data", "Convert a MovieLens directory to canonical CSVs");
  prep->add_option("--movielens", ml_dir, "ML-100K or ML-1M directory")->required();
  prep->add_option("--out", prep_out, "Output directory")->required();
  prep->add_option("--ratio", ml.train_ratio, "Train fraction")->capture_default_str();
  prep->add_option("--seed", ml.split_seed, "Split seed")->capture_default_str();
  prep->add_flag("--include-ids", ml.include_ids, "Add raw user/movie ids as static features");

  // train
  std::string train_config, train_data, train_out;
  std::optional<std::uint64_t> train_seed;
  auto* tr = app.add_subcommand("train", "Train one model");
  tr->add_option("--config", train_config, "Run config JSON");
  tr->add_option("--data", train_data, "Prepared data directory");
  tr->add_option("--seed", train_seed, "Seed (overrides config)");
  tr->add_option("--out", train_out, "Output directory");

  // eval
  std::string eval_ckpt, eval_data;
  auto* ev = app.add_subcommand("eval", "Held-out AUC and CE loss of a checkpoint");
  ev->add_option("--checkpoint", eval_ckpt, "Checkpoint manifest")->required();
  ev->add_option("--data", eval_data, "Prepared data directory")->required();

  // ablate
  std::string abl_panel, abl_config, abl_data, abl_out;
  std::vector<std::uint64_t> abl_seeds;
  auto* ab = app.add_subcommand("ablate", "Run one ablation panel over several seeds");
  ab->add_option("--panel", abl_panel, "A, B, C, D or J")->required();
  ab->add_option("--config", abl_config, "Run config JSON");
  ab->add_option("--data", abl_data, "Prepared data directory");
  ab->add_option("--seeds", abl_seeds, "Comma-separated seeds")->delimiter(',');
  ab->add_option("--out", abl_out, "Output directory");

  // precompute
  std::string pre_ckpt, pre_ads, pre_out;
  auto* pc = app.add_subcommand("precompute", "Build the ad cache");
  pc->add_option("--checkpoint", pre_ckpt, "Checkpoint manifest")->required();
  pc->add_option("--ads", pre_ads, "Ad feature table")->required();
  pc->add_option("--out", pre_out, "Cache file")->required();

  // rank
  std::string rank_ckpt, rank_cache, rank_user, rank_allow;
  std::size_t rank_k = 10;
  auto* rk = app.add_subcommand("rank", "Top-k ads for one user from the cache");
  rk->add_option("--checkpoint", rank_ckpt, "Checkpoint manifest")->required();
  rk->add_option("--cache", rank_cache, "Cache file")->required();
  rk->add_option("--user", rank_user, "User feature row, comma-separated, no id")->required();
  rk->add_option("--k", rank_k, "Number of ads")->capture_default_str();
  rk->add_option("--allow", rank_allow, "Comma-separated candidate ad ids");

  // bench
  std::string bench_ckpt, bench_cache, bench_ads, bench_out;
  BenchOptions bo;
  auto* bn = app.add_subcommand("bench", "Cached vs uncached scoring latency");
  bn->add_option("--checkpoint", bench_ckpt, "Checkpoint manifest")->required();
  bn->add_option("--cache", bench_cache, "Cache file")->required();
  bn->add_option("--queries", bo.queries, "Queries")->capture_default_str();
  bn->add_option("--candidates", bo.candidates, "Candidates per query")->capture_default_str();
  bn->add_option("--ads", bench_ads, "Ad table (default: <cache>.ads.csv)");
  bn->add_option("--workers", bo.workers, "Worker threads")->capture_default_str();
  bn->add_option("--k", bo.k, "Top-k")->capture_default_str();
  bn->add_option("--seed", bo.seed, "User sampling seed")->capture_default_str();
  bn->add_option("--uncached-queries", bo.uncached_queries, "Queries timed on the uncached path")
      ->capture_default_str();
  bn->add_option("--out", bench_out, "Also write the report here");

  // verify-cache
  std::string ver_ckpt, ver_cache, ver_ads, ver_users;
  std::size_t ver_pairs = 1000;
  std::uint64_t ver_seed = 0;
  auto* vc = app.add_subcommand("verify-cache", "Check cached scores against the full forward");
  vc->add_option("--checkpoint", ver_ckpt, "Checkpoint manifest")->required();
  vc->add_option("--cache", ver_cache, "Cache file")->required();
  vc->add_option("--ads", ver_ads, "Ad table the cache was built from")->required();
  vc->add_option("--users", ver_users, "User table")->required();
  vc->add_option("--pairs", ver_pairs, "Pairs to check")->capture_default_str();
  vc->add_option("--seed", ver_seed, "Pair sampling seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*prep) {
      const auto s = adapt_movielens(ml_dir, prep_out, ml);
      out << json{{"format", s.format},
                  {"users", s.users},
                  {"items", s.items},
                  {"ratings", s.ratings},
                  {"positives", s.positives},
                  {"train_samples", s.train_samples},
                  {"test_samples", s.test_samples}}
                 .dump()
          << "\n";
    } else if (*tr) {
      RunConfig rc = load_run_config(train_config);
      if (train_seed) rc.seed = *train_seed;
      const fs::path data_dir = pick_path(train_data, rc.data_dir, "--data");
      const fs::path out_dir = pick_path(train_out, rc.out_dir, "--out");
      const auto data = load_data_dir(data_dir);
      TrainOptions opts = rc.train_options();
      opts.run_id = "train";
      opts.out_dir = out_dir;
      opts.on_epoch = [&](const MetricsRecord& m) { progress(err, "train", m); };
      const auto result = train(rc.model, data.train, data.test, opts);
      write_text(out_dir / "config.json", rc.to_json().dump(2) + "\n");
      json history = json::array();
      for (const auto& e : result.history) history.push_back(metrics_json(e.metrics));
      out << json{{"best_epoch", result.best_epoch},
                  {"best", metrics_json(result.history[result.best_epoch - 1].metrics)},
                  {"history", history},
                  {"checkpoint", (out_dir / "checkpoint.json").string()}}
                 .dump()
          << "\n";
    } else if (*ev) {
      const auto ckpt = load_checkpoint(eval_ckpt);
      const auto data = load_data_dir(eval_data, false);
      const auto m = evaluate(ckpt.model, data.test);
      out << json{{"samples", data.test.size()}, {"auc", m.auc}, {"celoss", m.celoss}}.dump() << "\n";
    } else if (*ab) {
      RunConfig rc = load_run_config(abl_config);
      const Panel panel = parse_panel(abl_panel);
      const fs::path data_dir = pick_path(abl_data, rc.data_dir, "--data");
      const std::string out_dir = abl_out.empty() ? rc.out_dir : abl_out;
      const auto seeds = abl_seeds.empty() ? rc.seeds : abl_seeds;
      const auto data = load_data_dir(data_dir);
      TrainOptions opts = rc.train_options();
      if (!out_dir.empty()) opts.out_dir = fs::path(out_dir);
      const auto rows = run_ablation(rc.model, data.train, data.test, panel, seeds, opts,
                                     [&](const AblationRow& r) {
                                       err << "ablate " << r.panel << " " << r.variant << " seed " << r.seed
                                           << " auc " << r.auc << " celoss " << r.celoss << "\n";
                                     });
      const auto summary = summarize(rows);
      if (!out_dir.empty()) {
        write_ablation_csv(rows, fs::path(out_dir) / "ablation.csv");
        write_summary_csv(summary, fs::path(out_dir) / "summary.csv");
      }
      json j = json::array();
      for (const auto& s : summary) {
        j.push_back({{"panel", s.panel},
                     {"variant", s.variant},
                     {"seeds", s.seeds},
                     {"mean_auc", s.mean_auc},
                     {"mean_celoss", s.mean_celoss}});
      }
      out << j.dump() << "\n";
    } else if (*pc) {
      const auto ckpt = load_checkpoint(pre_ckpt);
      const auto ads = load_entity_table(pre_ads, ckpt.model.schema(), Side::kAd);
      const auto cache = precompute_ad_cache(ckpt.model, ads);
      write_ad_cache(cache, pre_out);
      // bench needs raw ad features for its uncached path; keep them next to the cache.
      write_entity_table(ads, ckpt.model.schema(), sidecar_path(pre_out));
      out << json{{"ads", cache.size()},
                  {"heads", cache.heads},
                  {"head_dim", cache.head_dim},
                  {"cache", pre_out}}
                 .dump()
          << "\n";
    } else if (*rk) {
      const auto ckpt = load_checkpoint(rank_ckpt);
      const auto cache = read_ad_cache(rank_cache);
      const Ranker ranker(ckpt.model, cache);
      const auto user = parse_feature_row(rank_user, ckpt.model.schema(), Side::kUser);
      std::optional<std::unordered_set<std::uint64_t>> allow;
      if (!rank_allow.empty()) allow = parse_id_list(rank_allow);
      if (rank_k == 0) throw ConfigError("--k must be >= 1");
      json j = json::array();
      for (const auto& r : ranker.rank(user, rank_k, allow)) j.push_back({{"ad_id", r.id}, {"score", r.score}});
      out << j.dump() << "\n";
    } else if (*bn) {
      const auto ckpt = load_checkpoint(bench_ckpt);
      const auto cache = read_ad_cache(bench_cache);
      const fs::path ads_path = bench_ads.empty() ? sidecar_path(bench_cache) : fs::path(bench_ads);
      const auto ads = load_entity_table(ads_path, ckpt.model.schema(), Side::kAd);
      const auto report = bench(ckpt.model, cache, ads, bo);
      const std::string text = to_json(report).dump() + "\n";
      if (!bench_out.empty()) write_text(bench_out, text);
      out << text;
    } else if (*vc) {
      const auto ckpt = load_checkpoint(ver_ckpt);
      const auto cache = read_ad_cache(ver_cache);
      const auto ads = load_entity_table(ver_ads, ckpt.model.schema(), Side::kAd);
      const auto users = load_entity_table(ver_users, ckpt.model.schema(), Side::kUser);
      const auto report = verify_cache_equivalence(ckpt.model, cache, ads, users, ver_pairs, ver_seed);
      json mism = json::array();
      for (const auto& m : report.mismatches) {
        mism.push_back({{"user_id", m.user_id},
                        {"ad_id", m.ad_id},
                        {"cached_score", m.cached_score},
                        {"full_score", m.full_score},
                        {"record_differs", m.record_differs}});
      }
      out << json{{"pairs", report.pairs},
                  {"score_mismatches", report.score_mismatches},
                  {"record_mismatches", report.record_mismatches},
                  {"passed", report.passed()},
                  {"mismatches", mism}}
                 .dump()
          << "\n";
      if (!report.passed()) return kExitVerification;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ServingError& e) {
    err << "serving error: " << e.what() << "\n";
    return kExitServing;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitData;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOk;
}

}  // namespace hit
