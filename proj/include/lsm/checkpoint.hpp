#pragma once

#include "lsm/mlp.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace lsm {

inline constexpr const char* kCheckpointFormat = "lsmeta-checkpoint/1";

/// A model with the settings that produced it. `kind` is f0, intermediate or adapted.
struct Checkpoint {
    std::string kind;
    MlpParams params;
    std::string config_hash;
    std::uint64_t seed = 0;
    nlohmann::json log = nlohmann::json::array();
};

/// Layers as {in, out, activation, weight (row-major), bias}. Doubles reload bit-exactly.
nlohmann::json checkpoint_json(const Checkpoint& c);
/// Throws DataError on a malformed document or a layer whose sizes disagree with its values.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json mlp_json(const MlpParams& params);
MlpParams mlp_from_json(const nlohmann::json& layers);

}  // namespace lsm
