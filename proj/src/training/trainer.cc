#include "hit/training/trainer.h"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hit/error.h"
#include "hit/model/checkpoint.h"
#include "hit/model/forward.h"
#include "hit/numerics/ops.h"
#include "hit/numerics/random.h"

namespace hit {

namespace {

constexpr std::size_t kScoreChunk = 4096;

std::vector<std::uint8_t> labels_of(const Dataset& d) {
  std::vector<std::uint8_t> out;
  out.reserve(d.size());
  for (const auto& s : d.samples) out.push_back(s.label);
  return out;
}

nlohmann::json run_info(const TrainOptions& options, std::size_t epoch, const MetricsRecord& m) {
  return {{"run_id", options.run_id}, {"variant", options.variant}, {"seed", options.seed},
          {"epoch", epoch},           {"auc", m.auc},                {"celoss", m.celoss}};
}

std::string format_double(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

}  // namespace

std::vector<float> score_dataset(const HitModel& model, const Dataset& dataset) {
  std::vector<float> scores;
  scores.reserve(dataset.size());
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < dataset.size(); start += kScoreChunk) {
    rows.clear();
    for (std::size_t i = start; i < std::min(dataset.size(), start + kScoreChunk); ++i) rows.push_back(i);
    const auto chunk = predict(model, encode(dataset, rows));
    scores.insert(scores.end(), chunk.begin(), chunk.end());
  }
  return scores;
}

MetricsRecord evaluate(const HitModel& model, const Dataset& dataset) {
  if (!(dataset.schema == model.schema())) {
    throw SchemaError("dataset schema does not match the checkpoint schema");
  }
  const auto scores = score_dataset(model, dataset);
  const auto labels = labels_of(dataset);
  MetricsRecord r;
  r.auc = auc(std::span<const float>(scores), labels);
  r.celoss = log_loss(std::span<const float>(scores), labels);
  return r;
}

void write_metrics_header(std::ostream& out) {
  out << "run_id,variant,seed,epoch,auc,celoss,rela_impr\n";
}

void write_metrics_row(std::ostream& out, const std::string& run_id, const std::string& variant,
                       const MetricsRecord& r) {
  out << run_id << ',' << variant << ',' << r.seed << ',' << r.epoch << ',' << format_double(r.auc)
      << ',' << format_double(r.celoss) << ','
      << (r.rela_impr ? format_double(*r.rela_impr) : std::string()) << '\n';
}

TrainResult train(const HitConfig& config, const Dataset& train_set, const Dataset& eval_set,
                  const TrainOptions& options) {
  config.validate();
  options.adam.validate();
  if (options.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (options.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(train_set.schema == eval_set.schema)) {
    throw SchemaError("train and eval sets use different schemas");
  }
  if (train_set.size() == 0) throw DataError("train", 0, "training set is empty");

  HitModel model = HitModel::initialize(config, train_set.schema, options.seed);
  AdamState state(model.params());
  TrainResult result{model, 0, {}};
  double best_auc = -1.0;

  std::ofstream metrics_csv;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    metrics_csv.open(*options.out_dir / "metrics.csv", std::ios::trunc);
    if (!metrics_csv) throw IoError("cannot write " + (*options.out_dir / "metrics.csv").string());
    write_metrics_header(metrics_csv);
  }

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    EpochLog log;
    const auto batches =
        make_batches(train_set.size(), options.batch_size, derive_seed(options.seed, epoch));
    for (const auto& rows : batches) {
      const EncodedBatch batch = encode(train_set, rows);
      std::vector<Tensor<float>> grads;
      double total = 0, ce = 0, gen = 0;
      try {
        Tape<float> tape;
        const auto vars = tape.parameters(model.params());
        const auto trace =
            forward(tape, config, model.layout(), std::span<const Var>(vars), batch);
        const auto losses =
            compute_losses(tape, config, trace, std::span<const float>(batch.labels));
        total = tape.value(losses.total).item();
        ce = tape.value(losses.cross_entropy).item();
        if (losses.generation_user) gen += tape.value(*losses.generation_user).item();
        if (losses.generation_ad) gen += tape.value(*losses.generation_ad).item();
        grads = tape.backward(losses.total, model.params().size());
        adam_step(model.mutable_params(), grads, state, options.adam);
      } catch (const NumericError& e) {
        // adam_step leaves parameters untouched on failure, so they are the
        // last finite ones.
        if (options.out_dir) {
          save_checkpoint(model, *options.out_dir / "partial.json",
                          {{"partial", true}, {"epoch", epoch}, {"step", state.step()},
                           {"seed", options.seed}});
        }
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch) +
                              " after " + std::to_string(state.step()) + " steps: " + e.what());
      }
      const double w = static_cast<double>(rows.size()) / static_cast<double>(train_set.size());
      log.train_loss += total * w;
      log.train_ce += ce * w;
      log.train_generation += gen * w;
    }
    log.metrics = evaluate(model, eval_set);
    log.metrics.epoch = epoch;
    log.metrics.seed = options.seed;
    if (options.baseline_auc) log.metrics.rela_impr = rela_impr(log.metrics.auc, *options.baseline_auc);
    if (metrics_csv.is_open()) {
      write_metrics_row(metrics_csv, options.run_id, options.variant, log.metrics);
      metrics_csv.flush();
    }
    if (log.metrics.auc > best_auc) {
      best_auc = log.metrics.auc;
      result.best_epoch = epoch;
      result.model = model;
      if (options.out_dir) {
        save_checkpoint(model, *options.out_dir / "checkpoint.json",
                        run_info(options, epoch, log.metrics));
      }
    }
    if (options.on_epoch) options.on_epoch(log.metrics);
    result.history.push_back(log);
  }
  return result;
}

}  // namespace hit
