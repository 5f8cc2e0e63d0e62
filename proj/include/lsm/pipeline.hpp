#pragma once

#include "lsm/config.hpp"
#include "lsm/experiment.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace lsm {

/// Stage order: segment (blocks and task manifest), pretrain, metatrain, adapt, predict, evaluate.
enum class Stage { segment, pretrain, metatrain, adapt, predict, evaluate };
std::string to_string(Stage s);
Stage stage_from_string(const std::string& name);
const std::vector<Stage>& all_stages();

struct StageReport {
    Stage stage = Stage::segment;
    bool skipped = false;
};

struct PipelineOptions {
    bool resume = false;  // skip stages whose outputs match the config hash
    int threads = 1;
};

/// Runs every stage in order. Errors carry the stage name and keep their category.
std::vector<StageReport> run_pipeline(const PipelineConfig& config, const PipelineOptions& options = {});

/// Runs one stage from its predecessors' artifacts under config.output_dir.
void run_stage(Stage stage, const PipelineConfig& config, const PipelineOptions& options = {});

/// Loads, segments and groups every configured region.
std::vector<RegionData> load_regions(const PipelineConfig& config);

/// Runs the configured experiment and writes it under output_dir/experiment.
ExperimentResult run_configured_experiment(const PipelineConfig& config, int threads = 1);

}  // namespace lsm
