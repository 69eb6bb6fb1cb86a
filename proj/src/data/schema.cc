#include "hit/data/schema.h"

#include <fstream>
#include <set>

#include "hit/error.h"

namespace hit {

std::string_view block_name(FeatureBlock block) {
  switch (block) {
    case FeatureBlock::kUserStatic:
      return "user-static";
    case FeatureBlock::kUserDynamic:
      return "user-dynamic";
    case FeatureBlock::kAdStatic:
      return "ad-static";
    case FeatureBlock::kAdDynamic:
      return "ad-dynamic";
  }
  return "?";
}

FeatureBlock parse_block(std::string_view name) {
  for (FeatureBlock b : kAllBlocks) {
    if (block_name(b) == name) return b;
  }
  throw SchemaError("unknown feature block '" + std::string(name) + "'");
}

FeatureSchema::FeatureSchema(std::vector<FeatureField> fields) : fields_(std::move(fields)) {
  std::set<std::string> names;
  int previous = 0;
  for (const FeatureField& f : fields_) {
    if (f.name.empty()) throw SchemaError("feature field with empty name");
    if (!names.insert(f.name).second) throw SchemaError("duplicate feature field '" + f.name + "'");
    if (f.cardinality < 1) throw SchemaError("field '" + f.name + "' has cardinality < 1");
    const int b = static_cast<int>(f.block);
    if (b < previous) {
      throw SchemaError("field '" + f.name +
                        "' is out of block order (expected user-static, user-dynamic, "
                        "ad-static, ad-dynamic)");
    }
    previous = b;
    ++widths_[b];
  }
  std::size_t offset = 0;
  for (int b = 0; b < 4; ++b) {
    offsets_[b] = offset;
    offset += widths_[b];
  }
  if (!fields_.empty() && (width(FeatureBlock::kUserStatic) == 0 ||
                           width(FeatureBlock::kAdStatic) == 0)) {
    throw SchemaError("schema needs at least one user-static and one ad-static field");
  }
}

std::vector<FeatureField> FeatureSchema::block_fields(FeatureBlock block) const {
  auto begin = fields_.begin() + static_cast<std::ptrdiff_t>(offset(block));
  return {begin, begin + static_cast<std::ptrdiff_t>(width(block))};
}

nlohmann::json FeatureSchema::to_json() const {
  nlohmann::json fields = nlohmann::json::array();
  for (const FeatureField& f : fields_) {
    fields.push_back({{"name", f.name},
                      {"block", std::string(block_name(f.block))},
                      {"cardinality", f.cardinality}});
  }
  return {{"fields", fields}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("fields") || !j["fields"].is_array()) {
    throw SchemaError("schema must be an object with a 'fields' array");
  }
  std::vector<FeatureField> fields;
  for (const auto& f : j["fields"]) {
    if (!f.is_object() || !f.contains("name") || !f.contains("block") ||
        !f.contains("cardinality") || !f["name"].is_string() || !f["block"].is_string() ||
        !f["cardinality"].is_number_integer() || f["cardinality"].get<std::int64_t>() < 1) {
      throw SchemaError("schema field needs string name, string block, positive cardinality: " +
                        f.dump());
    }
    fields.push_back({f["name"].get<std::string>(), parse_block(f["block"].get<std::string>()),
                      f["cardinality"].get<std::uint32_t>()});
  }
  return FeatureSchema(std::move(fields));
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  return FeatureSchema::from_json(j);
}

void save_schema(const FeatureSchema& schema, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write schema file " + path.string());
  out << schema.to_json().dump(2) << '\n';
}

}  // namespace hit
