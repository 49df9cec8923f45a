#pragma once

#include <filesystem>

#include <json.hpp>

#include "ktlab/seq/model.hpp"

namespace ktlab::seq {

inline constexpr int kCheckpointVersion = 1;

/// {"format":"ktlab-model","version":1,"dims":{...},"blocks":{name:[column-major values]}}
nlohmann::json params_to_json(const ModelParams& params);
/// Rejects unknown formats, versions and shape mismatches.
ModelParams params_from_json(const nlohmann::json& j);

void save_model(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace ktlab::seq
