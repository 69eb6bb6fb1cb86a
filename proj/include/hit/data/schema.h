#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hit {

enum class FeatureBlock { kUserStatic = 0, kUserDynamic = 1, kAdStatic = 2, kAdDynamic = 3 };

inline constexpr std::array<FeatureBlock, 4> kAllBlocks = {
    FeatureBlock::kUserStatic, FeatureBlock::kUserDynamic, FeatureBlock::kAdStatic,
    FeatureBlock::kAdDynamic};

std::string_view block_name(FeatureBlock block);
FeatureBlock parse_block(std::string_view name);  // throws SchemaError

struct FeatureField {
  std::string name;
  FeatureBlock block = FeatureBlock::kUserStatic;
  std::uint32_t cardinality = 1;

  friend bool operator==(const FeatureField&, const FeatureField&) = default;
};

// Ordered feature fields. Fields are grouped by block in canonical order
// (user-static, user-dynamic, ad-static, ad-dynamic), which is also the column
// order of the canonical CSV after the leading label column.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<FeatureField> fields);

  const std::vector<FeatureField>& fields() const { return fields_; }
  std::size_t size() const { return fields_.size(); }
  const FeatureField& field(std::size_t i) const { return fields_.at(i); }

  // Number of fields in `block` and the position of its first field.
  std::size_t width(FeatureBlock block) const { return widths_[static_cast<int>(block)]; }
  std::size_t offset(FeatureBlock block) const { return offsets_[static_cast<int>(block)]; }
  // Fields of one block, in schema order.
  std::vector<FeatureField> block_fields(FeatureBlock block) const;

  nlohmann::json to_json() const;
  static FeatureSchema from_json(const nlohmann::json& j);

  friend bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
    return a.fields_ == b.fields_;
  }

 private:
  std::vector<FeatureField> fields_;
  std::array<std::size_t, 4> widths_{};
  std::array<std::size_t, 4> offsets_{};
};

FeatureSchema load_schema(const std::filesystem::path& path);
void save_schema(const FeatureSchema& schema, const std::filesystem::path& path);

}  // namespace hit
