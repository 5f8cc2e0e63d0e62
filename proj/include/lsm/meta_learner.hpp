#pragma once

#include "lsm/meta_grad.hpp"
#include "lsm/mlp.hpp"
#include "lsm/tasks.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace lsm {

/// Softmax task weights or the uniform 1/B ablation.
enum class TaskWeighting { softmax, uniform };

std::string to_string(TaskWeighting w);
TaskWeighting task_weighting_from_string(const std::string& name);

struct MetaConfig {
    double alpha = 0.1;
    int inner_steps = 5;
    double meta_lr = 1e-4;
    int meta_epochs = 5000;
    int task_batch_size = 4;
    GradMode grad_mode = GradMode::second_order;
    TaskWeighting weighting = TaskWeighting::softmax;
    std::uint64_t seed = 0;

    /// meta_epochs may be 0 (no training); every other count must be positive.
    void validate() const;
};

struct MetaLogEntry {
    int epoch = 0;
    double loss = 0.0;
    std::vector<int> task_ids;
};

struct IntermediateModel {
    MlpParams params;
    std::vector<MetaLogEntry> log;
};

/// `steps` full-batch SGD steps on the support cross-entropy.
/// Logs a learning-rate warning when the support loss ends higher than it started.
MlpParams inner_adapt(const MlpParams& theta, const LabeledBatch& support, double alpha, int steps);

/// Support/query batches for the picked tasks with their weights.
std::vector<WeightedTask> weighted_batch(std::span<const MetaTask> tasks, std::span<const std::size_t> picks,
                                         std::span<const FeatureVector> pool, std::size_t n_total,
                                         TaskWeighting weighting);

/// Adam on the weighted query loss after inner adaptation; tasks drawn uniformly with replacement.
/// Throws DivergenceError when the meta-loss becomes non-finite.
IntermediateModel meta_train(const MlpParams& f0, std::span<const MetaTask> train_tasks,
                             std::span<const FeatureVector> pool, std::size_t n_total, const MetaConfig& config);

/// Same computation as inner_adapt; throws ArgumentError on an empty support set.
MlpParams few_shot_adapt(const MlpParams& model, const LabeledBatch& support, double alpha = 0.1, int steps = 5);

/// `epoch,meta_loss,task_ids` with ids joined by ';'.
void write_meta_log_csv(std::ostream& out, std::span<const MetaLogEntry> log);
void write_meta_log_csv(const std::filesystem::path& path, std::span<const MetaLogEntry> log);

}  // namespace lsm
