#pragma once

#include "lsm/mlp.hpp"
#include "lsm/slic.hpp"
#include "lsm/stack.hpp"

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lsm {

/// One block turned into a few-shot task. Sample indices point into a shared pool.
struct MetaTask {
    int task_id = 0;  // block id
    std::string region;
    std::vector<std::size_t> samples;  // all labeled samples of the block, ascending
    std::vector<std::size_t> support;
    std::vector<std::size_t> query;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::uint64_t split_seed = 0;
    double weight = 0.0;

    std::size_t n() const { return samples.size(); }
};

struct ExcludedBlock {
    int block_id = 0;
    std::string region;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

struct TaskBuild {
    std::vector<MetaTask> tasks;
    std::vector<ExcludedBlock> excluded;
};

/// One task per block holding at least `min_per_class` samples of each class.
/// `offset` is added to the block's sample indices, for pools spanning several regions.
/// Throws DataError when no block is eligible.
TaskBuild build_tasks(const std::vector<Block>& blocks, std::span<const FeatureVector> samples,
                      std::size_t min_per_class = 1, const std::string& region = "", std::size_t offset = 0);

struct MetaDatasets {
    std::vector<MetaTask> train;
    std::vector<MetaTask> test;
    std::size_t n_total = 0;
    std::uint64_t seed = 0;
};

std::size_t total_samples(std::span<const MetaTask> tasks);

/// Shuffles with `seed` and puts the first floor(fraction * n) tasks in train.
MetaDatasets split_tasks(std::vector<MetaTask> tasks, double fraction, std::uint64_t seed);

/// Support size: a fixed count or half the task's samples (rounded down).
struct KShot {
    enum class Kind { fixed, half };
    Kind kind = Kind::fixed;
    std::size_t k = 5;

    static KShot fixed(std::size_t k) { return {Kind::fixed, k}; }
    static KShot half() { return {Kind::half, 0}; }
    std::size_t resolve(std::size_t n) const { return kind == Kind::half ? n / 2 : k; }
    std::string to_string() const;
    /// Accepts a positive integer or "half".
    static KShot parse(const std::string& text);
};

/// Class-balanced support draw: classes alternate starting with the majority, then the remainder comes
/// from whichever class still has samples. Query gets the rest in ascending order.
MetaTask split_support_query(MetaTask task, std::span<const FeatureVector> pool, KShot k_shot, std::uint64_t seed);

/// Splits every task with a seed derived from `seed` and the task id.
void split_all(std::vector<MetaTask>& tasks, std::span<const FeatureVector> pool, KShot k_shot, std::uint64_t seed);

/// Softmax of n_k / n_total across the batch.
std::vector<double> task_weights(std::span<const MetaTask> batch, std::size_t n_total);

LabeledBatch gather(std::span<const FeatureVector> pool, std::span<const std::size_t> indices);

nlohmann::json task_manifest(const MetaDatasets& data, const std::vector<ExcludedBlock>& excluded);
MetaDatasets datasets_from_manifest(const nlohmann::json& manifest);

}  // namespace lsm
