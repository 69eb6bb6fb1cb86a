#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hit/data/dataset.h"
#include "hit/model/hit_model.h"

namespace hit {

// Feature rows of one side keyed by entity id: the ad table
// (ad_id,<ad fields>) that feeds precomputation, or a user table
// (user_id,<user fields>). Fields follow schema order, static then dynamic.
struct EntityTable {
  Side side = Side::kAd;
  std::vector<std::uint64_t> ids;
  IndexMatrix static_ids;
  IndexMatrix dynamic_ids;

  std::size_t size() const { return ids.size(); }
  // Rows `rows` of this table as a new table, in the given order.
  EntityTable select(const std::vector<std::size_t>& rows) const;
};

std::string entity_header(const FeatureSchema& schema, Side side);

// Throws IoError, SchemaError (header) or DataError (row, with line number).
EntityTable load_entity_table(const std::filesystem::path& path, const FeatureSchema& schema,
                              Side side);
void write_entity_table(const EntityTable& table, const FeatureSchema& schema,
                        const std::filesystem::path& path);

// One comma-separated row of a side's feature ids, no id column (the
// `rank --user` argument). Returns a one-row table with id 0.
EntityTable parse_feature_row(const std::string& row, const FeatureSchema& schema, Side side);

// Uniformly random feature rows with ids first_id, first_id+1, ...
EntityTable random_entities(const FeatureSchema& schema, Side side, std::size_t count,
                            std::uint64_t seed, std::uint64_t first_id = 0);

}  // namespace hit
