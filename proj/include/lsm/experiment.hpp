#pragma once

#include "lsm/meta_learner.hpp"
#include "lsm/metrics.hpp"
#include "lsm/slic.hpp"
#include "lsm/stack.hpp"
#include "lsm/tasks.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lsm {

/// A: train and test on parts of region 1. B: train on region 1, test on region 2.
/// C: train on parts of both, test on the rest of region 1. D: train on region 1 and part of region 2,
/// test on the rest of region 2.
enum class ExperimentMode { A, B, C, D };
std::string to_string(ExperimentMode m);
ExperimentMode experiment_mode_from_string(const std::string& name);
std::size_t regions_required(ExperimentMode m);

/// A segmented region with its labeled samples grouped into blocks.
struct RegionData {
    std::string name;
    RasterStack stack;
    Segmentation segmentation;
    std::vector<FeatureVector> samples;
    std::vector<std::size_t> excluded_samples;
};

RegionData prepare_region(std::string name, RasterStack stack, std::span<const SamplePoint> points,
                          const SlicConfig& slic);

struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::A;
    KShot k_shot = KShot::fixed(5);
    int repeats = 10;
    double train_fraction = 0.6;
    std::size_t min_per_class = 1;
    std::size_t min_eval_samples = 6;  // test tasks with fewer samples are not scored
    MetaConfig meta;                   // alpha and inner_steps also drive test-time adaptation
    bool control = true;               // global MLP trained on the pooled train samples and test supports
    bool control_adapt = true;         // adapt the control on each test support like the block models
    int control_epochs = 300;
    double control_lr = 1e-2;
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const;
};

struct RunResult {
    int repeat = 0;
    std::uint64_t seed = 0;
    std::size_t train_tasks = 0;
    std::size_t test_tasks = 0;
    ConfusionCounts counts;
    Metrics metrics;
    std::vector<double> scores;  // pooled query predictions
    std::vector<int> labels;
    std::optional<ConfusionCounts> control_counts;
    std::optional<double> auc;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<RunResult> runs;
    RunStatistics oa;
    std::optional<RunStatistics> control_oa;
    RocCurve roc;  // pooled over all runs
};

/// Throws ConfigError when the mode needs more regions than given, DataError when a run has
/// no usable train or test task.
ExperimentResult run_experiment(const ExperimentConfig& config, const MlpParams& f0,
                                std::span<const RegionData> regions);

/// runs.csv, summary.csv and roc.csv in `dir`.
void write_experiment(const std::filesystem::path& dir, const ExperimentResult& result);

}  // namespace lsm
