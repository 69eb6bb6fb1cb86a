#include "hit/data/dataset.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "hit/error.h"
#include "hit/numerics/random.h"

namespace hit {

void Dataset::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.ids.size() != schema.size()) {
      throw SchemaError("sample " + std::to_string(i) + " has " + std::to_string(s.ids.size()) +
                        " ids, schema has " + std::to_string(schema.size()) + " fields");
    }
    if (s.label > 1) throw SchemaError("sample " + std::to_string(i) + " has non-binary label");
    for (std::size_t f = 0; f < s.ids.size(); ++f) {
      if (s.ids[f] >= schema.field(f).cardinality) {
        throw SchemaError("sample " + std::to_string(i) + " field '" + schema.field(f).name +
                          "' id " + std::to_string(s.ids[f]) + " >= cardinality " +
                          std::to_string(schema.field(f).cardinality));
      }
    }
  }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string expected_header(const FeatureSchema& schema) {
  std::string header = "label";
  for (const FeatureField& f : schema.fields()) header += "," + f.name;
  return header;
}

}  // namespace

Dataset load_canonical_csv(const std::filesystem::path& path, const FeatureSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string file = path.string();
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(file + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected_header(schema)) {
    throw SchemaError(file + ": header '" + line + "' does not match schema '" +
                      expected_header(schema) + "'");
  }

  Dataset dataset{schema, {}};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_commas(line);
    if (cells.size() != schema.size() + 1) {
      throw DataError(file, line_no, "expected " + std::to_string(schema.size() + 1) +
                                         " columns, got " + std::to_string(cells.size()));
    }
    Sample sample;
    sample.ids.resize(schema.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
      if (ec != std::errc() || ptr != cells[c].data() + cells[c].size()) {
        throw DataError(file, line_no, "column " + std::to_string(c + 1) +
                                           " is not a non-negative integer: '" +
                                           std::string(cells[c]) + "'");
      }
      if (c == 0) {
        if (v > 1) throw DataError(file, line_no, "label must be 0 or 1");
        sample.label = static_cast<std::uint8_t>(v);
        continue;
      }
      const FeatureField& field = schema.field(c - 1);
      if (v >= field.cardinality) {
        throw DataError(file, line_no, "field '" + field.name + "' id " + std::to_string(v) +
                                           " out of range [0, " +
                                           std::to_string(field.cardinality) + ")");
      }
      sample.ids[c - 1] = static_cast<std::uint32_t>(v);
    }
    dataset.samples.push_back(std::move(sample));
  }
  return dataset;
}

void write_canonical_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << expected_header(dataset.schema) << '\n';
  std::string row;
  for (const Sample& s : dataset.samples) {
    row = std::to_string(s.label);
    for (std::uint32_t id : s.ids) {
      row += ',';
      row += std::to_string(id);
    }
    out << row << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n,
                                                                            double ratio,
                                                                            std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ContractError("split ratio must lie in (0, 1)");
  if (n == 0) throw ContractError("cannot split an empty dataset");
  auto order = seeded_permutation(n, seed);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return {std::move(train), std::move(test)};
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> indices) {
  Dataset out{dataset.schema, {}};
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(dataset.samples.at(i));
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double ratio, std::uint64_t seed) {
  auto [train, test] = split_indices(dataset.size(), ratio, seed);
  return {subset(dataset, train), subset(dataset, test)};
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t num_samples,
                                                   std::size_t batch_size,
                                                   std::uint64_t shuffle_seed) {
  if (batch_size < 1) throw ContractError("batch size must be >= 1");
  auto order = seeded_permutation(num_samples, shuffle_seed);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < num_samples; start += batch_size) {
    const std::size_t end = std::min(num_samples, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

const IndexMatrix& EncodedBatch::block(FeatureBlock b) const {
  switch (b) {
    case FeatureBlock::kUserStatic:
      return user_static;
    case FeatureBlock::kUserDynamic:
      return user_dynamic;
    case FeatureBlock::kAdStatic:
      return ad_static;
    case FeatureBlock::kAdDynamic:
      return ad_dynamic;
  }
  return user_static;
}

IndexMatrix& EncodedBatch::block(FeatureBlock b) {
  return const_cast<IndexMatrix&>(std::as_const(*this).block(b));
}

EncodedBatch encode(const Dataset& dataset, std::span<const std::size_t> indices) {
  EncodedBatch batch;
  const std::size_t n = indices.size();
  for (FeatureBlock b : kAllBlocks) batch.block(b) = IndexMatrix(n, dataset.schema.width(b));
  batch.labels.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    const Sample& s = dataset.samples.at(indices[r]);
    for (FeatureBlock b : kAllBlocks) {
      const std::size_t offset = dataset.schema.offset(b);
      IndexMatrix& m = batch.block(b);
      for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = s.ids[offset + c];
    }
    batch.labels[r] = static_cast<float>(s.label);
  }
  return batch;
}

EncodedBatch encode(const Dataset& dataset) {
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return encode(dataset, all);
}

}  // namespace hit
