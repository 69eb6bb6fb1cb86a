#include "hit/training/ablation.h"

#include <algorithm>
#include <fstream>
#include <iomanip>

#include "hit/error.h"

namespace hit {

std::string panel_name(Panel panel) {
  switch (panel) {
    case Panel::kA: return "A";
    case Panel::kB: return "B";
    case Panel::kC: return "C";
    case Panel::kD: return "D";
    case Panel::kJ: return "J";
  }
  return "?";
}

Panel parse_panel(const std::string& name) {
  for (Panel p : {Panel::kA, Panel::kB, Panel::kC, Panel::kD, Panel::kJ}) {
    if (panel_name(p) == name) return p;
  }
  throw ConfigError("unknown panel '" + name + "' (expected A, B, C, D or J)");
}

std::vector<AblationVariant> panel_variants(Panel panel, const HitConfig& base) {
  HitConfig full = base;
  full.use_generators = true;
  full.use_representers = true;
  full.use_target_gen = true;
  full.use_non_target_gen = true;
  full.generators_use_dynamic = false;
  full.distance_metric = DistanceMetric::kCosine;
  if (full.num_generators < 2) full.num_generators = 2;

  std::vector<AblationVariant> out;
  auto with = [&](std::string name, auto edit) {
    HitConfig c = full;
    edit(c);
    c.validate();
    out.push_back({std::move(name), std::move(c)});
  };
  auto none = [](HitConfig&) {};
  switch (panel) {
    case Panel::kA:
      with("full", none);
      with("wo_generators", [](HitConfig& c) { c.use_generators = false; });
      with("wo_representers", [](HitConfig& c) { c.use_representers = false; });
      with("wo_both", [](HitConfig& c) {
        c.use_generators = false;
        c.use_representers = false;
      });
      break;
    case Panel::kB:
      with("full", none);
      with("wo_target", [](HitConfig& c) { c.use_target_gen = false; });
      with("wo_non_target", [](HitConfig& c) { c.use_non_target_gen = false; });
      with("wo_both", [](HitConfig& c) {
        c.use_target_gen = false;
        c.use_non_target_gen = false;
      });
      break;
    case Panel::kC:
      with("full", none);
      with("w_dynamic", [](HitConfig& c) { c.generators_use_dynamic = true; });
      break;
    case Panel::kD:
      with("cosine", none);
      with("mae", [](HitConfig& c) { c.distance_metric = DistanceMetric::kMae; });
      with("mse", [](HitConfig& c) { c.distance_metric = DistanceMetric::kMse; });
      break;
    case Panel::kJ:
      for (std::size_t j = 1; j <= 6; ++j) {
        with("J=" + std::to_string(j), [j](HitConfig& c) { c.num_heads = j; });
      }
      break;
  }
  return out;
}

std::vector<AblationRow> run_ablation(const HitConfig& base, const Dataset& train_set,
                                      const Dataset& eval_set, Panel panel,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainOptions& options,
                                      const std::function<void(const AblationRow&)>& on_row) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  std::vector<AblationRow> rows;
  for (const auto& variant : panel_variants(panel, base)) {
    for (std::uint64_t seed : seeds) {
      TrainOptions run = options;
      run.seed = seed;
      run.variant = variant.name;
      run.run_id = panel_name(panel) + "/" + variant.name + "/" + std::to_string(seed);
      if (options.out_dir) {
        run.out_dir = *options.out_dir / panel_name(panel) / variant.name /
                      ("seed-" + std::to_string(seed));
      }
      const auto result = train(variant.config, train_set, eval_set, run);
      const auto& best = result.history.at(result.best_epoch - 1).metrics;
      rows.push_back({panel_name(panel), variant.name, seed, best.auc, best.celoss});
      if (on_row) on_row(rows.back());
    }
  }
  return rows;
}

std::vector<AblationSummary> summarize(const std::vector<AblationRow>& rows) {
  std::vector<AblationSummary> out;
  for (const auto& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const AblationSummary& s) {
      return s.panel == r.panel && s.variant == r.variant;
    });
    if (it == out.end()) {
      out.push_back({r.panel, r.variant, 0, 0.0, 0.0});
      it = out.end() - 1;
    }
    ++it->seeds;
    it->mean_auc += r.auc;
    it->mean_celoss += r.celoss;
  }
  for (auto& s : out) {
    s.mean_auc /= static_cast<double>(s.seeds);
    s.mean_celoss /= static_cast<double>(s.seeds);
  }
  return out;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setprecision(10);
  return out;
}

}  // namespace

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "panel,variant,seed,auc,celoss\n";
  for (const auto& r : rows) {
    out << r.panel << ',' << r.variant << ',' << r.seed << ',' << r.auc << ',' << r.celoss << '\n';
  }
}

void write_summary_csv(const std::vector<AblationSummary>& summary,
                       const std::filesystem::path& path) {
  auto out = open_csv(path);
  out << "panel,variant,seeds,mean_auc,mean_celoss\n";
  for (const auto& s : summary) {
    out << s.panel << ',' << s.variant << ',' << s.seeds << ',' << s.mean_auc << ','
        << s.mean_celoss << '\n';
  }
}

}  // namespace hit
