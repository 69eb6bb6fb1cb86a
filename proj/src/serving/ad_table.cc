#include "hit/serving/ad_table.h"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "hit/error.h"
#include "hit/numerics/random.h"

namespace hit {

namespace {

FeatureBlock static_block(Side s) {
  return s == Side::kUser ? FeatureBlock::kUserStatic : FeatureBlock::kAdStatic;
}
FeatureBlock dynamic_block(Side s) {
  return s == Side::kUser ? FeatureBlock::kUserDynamic : FeatureBlock::kAdDynamic;
}

std::vector<FeatureField> side_fields(const FeatureSchema& schema, Side side) {
  std::vector<FeatureField> out;
  for (FeatureBlock b : {static_block(side), dynamic_block(side)}) {
    for (const auto& f : schema.block_fields(b)) out.push_back(f);
  }
  return out;
}

EntityTable empty_table(const FeatureSchema& schema, Side side, std::size_t rows) {
  EntityTable t;
  t.side = side;
  t.ids.resize(rows);
  t.static_ids = IndexMatrix(rows, schema.width(static_block(side)));
  t.dynamic_ids = IndexMatrix(rows, schema.width(dynamic_block(side)));
  return t;
}

void set_feature(EntityTable& t, std::size_t row, std::size_t col, std::uint32_t v) {
  if (col < t.static_ids.cols()) {
    t.static_ids(row, col) = v;
  } else {
    t.dynamic_ids(row, col - t.static_ids.cols()) = v;
  }
}

std::uint32_t get_feature(const EntityTable& t, std::size_t row, std::size_t col) {
  return col < t.static_ids.cols() ? t.static_ids(row, col)
                                   : t.dynamic_ids(row, col - t.static_ids.cols());
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_u64(const std::string& s, std::uint64_t& v) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

// Parses feature cells into row `row`; returns an error message or "".
std::string fill_row(EntityTable& t, std::size_t row, const std::vector<FeatureField>& fields,
                     const std::vector<std::string>& cells, std::size_t first) {
  for (std::size_t f = 0; f < fields.size(); ++f) {
    std::uint64_t v = 0;
    if (!parse_u64(cells[first + f], v)) {
      return "field '" + fields[f].name + "' is not a non-negative integer: '" + cells[first + f] + "'";
    }
    if (v >= fields[f].cardinality) {
      return "field '" + fields[f].name + "' id " + std::to_string(v) + " out of range [0, " +
             std::to_string(fields[f].cardinality) + ")";
    }
    set_feature(t, row, f, static_cast<std::uint32_t>(v));
  }
  return "";
}

}  // namespace

EntityTable EntityTable::select(const std::vector<std::size_t>& rows) const {
  EntityTable t;
  t.side = side;
  t.static_ids = IndexMatrix(rows.size(), static_ids.cols());
  t.dynamic_ids = IndexMatrix(rows.size(), dynamic_ids.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    t.ids.push_back(ids.at(rows[r]));
    for (std::size_t c = 0; c < static_ids.cols(); ++c) t.static_ids(r, c) = static_ids(rows[r], c);
    for (std::size_t c = 0; c < dynamic_ids.cols(); ++c) t.dynamic_ids(r, c) = dynamic_ids(rows[r], c);
  }
  return t;
}

std::string entity_header(const FeatureSchema& schema, Side side) {
  std::string h = side_name(side) + "_id";
  for (const auto& f : side_fields(schema, side)) h += "," + f.name;
  return h;
}

EntityTable load_entity_table(const std::filesystem::path& path, const FeatureSchema& schema,
                              Side side) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string file = path.string();
  const auto fields = side_fields(schema, side);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(file + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != entity_header(schema, side)) {
    throw SchemaError(file + ": header '" + line + "' does not match '" +
                      entity_header(schema, side) + "'");
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
  for (std::size_t line_no = 2; std::getline(in, line); ++line_no) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split(line));
    line_numbers.push_back(line_no);
  }
  EntityTable t = empty_table(schema, side, rows.size());
  std::set<std::uint64_t> seen;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& cells = rows[r];
    if (cells.size() != fields.size() + 1) {
      throw DataError(file, line_numbers[r], "expected " + std::to_string(fields.size() + 1) +
                                                 " columns, got " + std::to_string(cells.size()));
    }
    if (!parse_u64(cells[0], t.ids[r])) {
      throw DataError(file, line_numbers[r], "id is not a non-negative integer: '" + cells[0] + "'");
    }
    if (!seen.insert(t.ids[r]).second) {
      throw DataError(file, line_numbers[r], "duplicate id " + cells[0]);
    }
    if (auto err = fill_row(t, r, fields, cells, 1); !err.empty()) {
      throw DataError(file, line_numbers[r], err);
    }
  }
  return t;
}

void write_entity_table(const EntityTable& table, const FeatureSchema& schema,
                        const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << entity_header(schema, table.side) << '\n';
  const std::size_t width = table.static_ids.cols() + table.dynamic_ids.cols();
  for (std::size_t r = 0; r < table.size(); ++r) {
    out << table.ids[r];
    for (std::size_t c = 0; c < width; ++c) out << ',' << get_feature(table, r, c);
    out << '\n';
  }
}

EntityTable parse_feature_row(const std::string& row, const FeatureSchema& schema, Side side) {
  const auto fields = side_fields(schema, side);
  const auto cells = split(row);
  if (cells.size() != fields.size()) {
    throw DataError("<" + side_name(side) + " row>", 1,
                    "expected " + std::to_string(fields.size()) + " ids (" +
                        entity_header(schema, side).substr(side_name(side).size() + 4) +
                        "), got " + std::to_string(cells.size()));
  }
  EntityTable t = empty_table(schema, side, 1);
  if (auto err = fill_row(t, 0, fields, cells, 0); !err.empty()) {
    throw DataError("<" + side_name(side) + " row>", 1, err);
  }
  return t;
}

EntityTable random_entities(const FeatureSchema& schema, Side side, std::size_t count,
                            std::uint64_t seed, std::uint64_t first_id) {
  const auto fields = side_fields(schema, side);
  EntityTable t = empty_table(schema, side, count);
  Rng rng(seed);
  for (std::size_t r = 0; r < count; ++r) {
    t.ids[r] = first_id + r;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      set_feature(t, r, f, static_cast<std::uint32_t>(rng.uniform_index(fields[f].cardinality)));
    }
  }
  return t;
}

}  // namespace hit
