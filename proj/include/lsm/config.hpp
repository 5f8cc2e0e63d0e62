#pragma once

#include "lsm/experiment.hpp"
#include "lsm/meta_learner.hpp"
#include "lsm/pretrain.hpp"
#include "lsm/slic.hpp"
#include "lsm/tasks.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace lsm {

struct RegionConfig {
    std::string name;
    std::vector<std::filesystem::path> bands;
    std::filesystem::path samples;
};

/// Every setting of a run. Relative paths resolve against the config file's directory.
struct PipelineConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "lsmeta-out";
    std::vector<RegionConfig> regions;
    SlicConfig slic;
    PretrainConfig pretrain;
    MetaConfig meta;
    double train_fraction = 0.6;
    std::size_t min_per_class = 1;
    KShot k_shot = KShot::fixed(5);
    ExperimentConfig experiment;  // mode, repeats and control settings; the rest is filled from above

    /// Settings only; no file checks.
    void validate_settings() const;
    /// validate_settings plus: at least one region, every referenced file exists.
    void validate() const;
    /// The experiment settings with meta, k_shot, seed and split options copied in.
    ExperimentConfig experiment_config() const;
};

/// Canonical JSON with every field present.
nlohmann::json config_json(const PipelineConfig& c);
/// Missing keys keep defaults; unknown keys and wrong types are ConfigErrors.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a of `text`, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);
/// Hash of the canonical JSON of the settings that shape the results (output_dir excluded).
std::string config_hash(const PipelineConfig& c);

}  // namespace lsm
