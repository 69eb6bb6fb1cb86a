#include "hit/model/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hit/error.h"

namespace hit {

namespace {

constexpr const char* kFormat = "hit-checkpoint";

void append_le(std::string& out, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float read_le(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

std::filesystem::path blob_path(const std::filesystem::path& manifest) {
  auto p = manifest;
  return p.replace_extension(".bin");
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const HitModel& model, const std::filesystem::path& path,
                     const nlohmann::json& info) {
  const auto& params = model.params();
  std::string blob;
  blob.reserve(params.element_count() * 4);
  nlohmann::json entries = nlohmann::json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& t = params.value(i);
    entries.push_back({{"name", params.name(i)},
                       {"shape", t.shape()},
                       {"offset", blob.size()},
                       {"count", t.size()}});
    for (float v : t.data()) append_le(blob, v);
  }
  const auto bin = blob_path(path);
  nlohmann::json manifest = {{"format", kFormat},
                             {"version", kCheckpointVersion},
                             {"config", model.config().to_json()},
                             {"schema", model.schema().to_json()},
                             {"blob", bin.filename().string()},
                             {"blob_bytes", blob.size()},
                             {"params", entries},
                             {"info", info}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_all(bin, blob);
  write_all(path, manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_all(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || manifest.value("format", "") != kFormat) {
    throw ConfigError(path.string() + ": not a HIT checkpoint manifest");
  }
  if (manifest.value("version", 0) != kCheckpointVersion) {
    throw ConfigError(path.string() + ": unsupported checkpoint version");
  }
  try {
    HitConfig config = HitConfig::from_json(manifest.at("config"));
    FeatureSchema schema = FeatureSchema::from_json(manifest.at("schema"));
    const auto bin = path.parent_path() / manifest.at("blob").get<std::string>();
    const std::string blob = read_all(bin);
    if (blob.size() != manifest.at("blob_bytes").get<std::size_t>()) {
      throw DimensionError(bin.string() + ": blob holds " + std::to_string(blob.size()) +
                           " bytes, manifest says " + manifest.at("blob_bytes").dump());
    }
    ParameterSet<float> params;
    std::size_t expected_offset = 0;
    for (const auto& e : manifest.at("params")) {
      const auto name = e.at("name").get<std::string>();
      const auto shape = e.at("shape").get<Shape>();
      const auto offset = e.at("offset").get<std::size_t>();
      const auto count = e.at("count").get<std::size_t>();
      if (offset != expected_offset || count != shape_size(shape) ||
          offset + count * 4 > blob.size()) {
        throw DimensionError("checkpoint entry " + name + " has inconsistent offset/count");
      }
      std::vector<float> values(count);
      for (std::size_t k = 0; k < count; ++k) values[k] = read_le(blob.data() + offset + 4 * k);
      params.add(name, Tensor<float>(shape, std::move(values)));
      expected_offset = offset + count * 4;
    }
    if (expected_offset != blob.size()) throw DimensionError("checkpoint blob has trailing bytes");
    return Checkpoint{HitModel(std::move(config), std::move(schema), std::move(params)),
                      manifest.value("info", nlohmann::json::object())};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace hit
