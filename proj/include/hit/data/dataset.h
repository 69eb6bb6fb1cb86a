#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "hit/data/schema.h"

namespace hit {

// One interaction: an id per schema field (in schema order) and a binary label.
struct Sample {
  std::vector<std::uint32_t> ids;
  std::uint8_t label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
  friend auto operator<=>(const Sample&, const Sample&) = default;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  // Throws SchemaError naming the first non-conforming sample.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Canonical CSV: header `label,<field names in schema order>`, one row per
// sample, all values pre-encoded integers.
Dataset load_canonical_csv(const std::filesystem::path& path, const FeatureSchema& schema);
void write_canonical_csv(const Dataset& dataset, const std::filesystem::path& path);

// Seeded shuffle of [0, n) split into a prefix of round(ratio * n) indices and
// the remainder.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double ratio,
                                                                            std::uint64_t seed);

std::pair<Dataset, Dataset> split(const Dataset& dataset, double ratio, std::uint64_t seed);

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices);

// Sample indices of one epoch: a seeded shuffle cut into batches of
// `batch_size`, keeping the final short batch.
std::vector<std::vector<std::size_t>> make_batches(std::size_t num_samples,
                                                   std::size_t batch_size,
                                                   std::uint64_t shuffle_seed);

// Column-major integer matrix: column c (one feature field) is contiguous so
// it can feed an embedding lookup directly.
class IndexMatrix {
 public:
  IndexMatrix() = default;
  IndexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint32_t operator()(std::size_t r, std::size_t c) const { return values_[c * rows_ + r]; }
  std::uint32_t& operator()(std::size_t r, std::size_t c) { return values_[c * rows_ + r]; }
  std::span<const std::uint32_t> column(std::size_t c) const {
    return std::span<const std::uint32_t>(values_).subspan(c * rows_, rows_);
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint32_t> values_;
};

// Per-block index matrices of a batch plus labels as floats.
struct EncodedBatch {
  IndexMatrix user_static;
  IndexMatrix user_dynamic;
  IndexMatrix ad_static;
  IndexMatrix ad_dynamic;
  std::vector<float> labels;

  std::size_t size() const { return labels.size(); }
  const IndexMatrix& block(FeatureBlock b) const;
  IndexMatrix& block(FeatureBlock b);
};

EncodedBatch encode(const Dataset& dataset, std::span<const std::size_t> indices);
// Whole dataset in order.
EncodedBatch encode(const Dataset& dataset);

}  // namespace hit
