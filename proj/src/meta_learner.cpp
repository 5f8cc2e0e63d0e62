#include "lsm/meta_learner.hpp"

#include "lsm/error.hpp"
#include "lsm/log.hpp"
#include "lsm/optim.hpp"
#include "lsm/raster.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace lsm {

std::string to_string(TaskWeighting w) { return w == TaskWeighting::softmax ? "softmax" : "uniform"; }

TaskWeighting task_weighting_from_string(const std::string& name) {
    if (name == "softmax") return TaskWeighting::softmax;
    if (name == "uniform") return TaskWeighting::uniform;
    throw ConfigError("unknown task weighting '" + name + "' (expected softmax or uniform)");
}

void MetaConfig::validate() const {
    if (!(alpha > 0.0)) throw ConfigError("meta: alpha must be > 0");
    if (inner_steps < 1) throw ConfigError("meta: inner_steps must be >= 1");
    if (!(meta_lr > 0.0)) throw ConfigError("meta: meta_lr must be > 0");
    if (meta_epochs < 0) throw ConfigError("meta: meta_epochs must be >= 0");
    if (task_batch_size < 1) throw ConfigError("meta: task_batch_size must be >= 1");
}

MlpParams inner_adapt(const MlpParams& theta, const LabeledBatch& support, double alpha, int steps) {
    if (support.empty()) throw ArgumentError("inner_adapt: empty support set");
    if (steps < 0) throw ArgumentError("inner_adapt: steps must be >= 0");
    theta.validate();
    if (steps == 0) return theta;
    const MlpParams adapted =
        theta.with_tensors(inner_sgd(theta.tensors(), support, alpha, steps, mlp_loss_fn(theta.activations())));
    const double before = mean_cross_entropy(forward_batch(theta, support.x), support.y);
    const double after = mean_cross_entropy(forward_batch(adapted, support.x), support.y);
    if (after > before) {
        log_warning("support loss rose from " + format_double(before) + " to " + format_double(after) +
                    " during adaptation; alpha " + format_double(alpha) + " may be too large");
    }
    return adapted;
}

std::vector<WeightedTask> weighted_batch(std::span<const MetaTask> tasks, std::span<const std::size_t> picks,
                                         std::span<const FeatureVector> pool, std::size_t n_total,
                                         TaskWeighting weighting) {
    std::vector<MetaTask> chosen;
    for (const auto i : picks) chosen.push_back(tasks[i]);
    std::vector<double> w;
    if (weighting == TaskWeighting::softmax) {
        w = task_weights(chosen, n_total);
    } else {
        w.assign(chosen.size(), 1.0 / static_cast<double>(chosen.size()));
    }
    std::vector<WeightedTask> out;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        if (chosen[k].support.empty() || chosen[k].query.empty()) {
            throw ArgumentError("task " + std::to_string(chosen[k].task_id) + " has no support/query split");
        }
        out.push_back({gather(pool, chosen[k].support), gather(pool, chosen[k].query), w[k]});
    }
    return out;
}

IntermediateModel meta_train(const MlpParams& f0, std::span<const MetaTask> train_tasks,
                             std::span<const FeatureVector> pool, std::size_t n_total, const MetaConfig& config) {
    config.validate();
    f0.validate();
    if (train_tasks.empty()) throw ArgumentError("meta_train: no training tasks");
    Rng rng(config.seed);
    ParamList theta = f0.tensors();
    AdamState adam = AdamState::zeros_like(theta);
    const LossFn loss = mlp_loss_fn(f0.activations());
    IntermediateModel model;
    std::vector<std::size_t> picks(static_cast<std::size_t>(config.task_batch_size));
    for (int epoch = 0; epoch < config.meta_epochs; ++epoch) {
        MetaLogEntry entry;
        entry.epoch = epoch;
        for (auto& p : picks) {
            p = rng.below(train_tasks.size());
            entry.task_ids.push_back(train_tasks[p].task_id);
        }
        const auto batch = weighted_batch(train_tasks, picks, pool, n_total, config.weighting);
        const MetaGradient g = meta_grad(theta, batch, config.alpha, config.inner_steps, config.grad_mode, loss);
        if (!std::isfinite(g.loss) || !all_finite(g.gradient)) {
            std::string ids;
            for (const auto id : entry.task_ids) ids += (ids.empty() ? "" : ",") + std::to_string(id);
            throw DivergenceError("meta-training diverged at epoch " + std::to_string(epoch) + ": meta-loss " +
                                  format_double(g.loss) + " on tasks [" + ids + "]; lower meta_lr (" +
                                  format_double(config.meta_lr) + ") or alpha (" + format_double(config.alpha) + ")");
        }
        adam_step(adam, theta, g.gradient, config.meta_lr);
        entry.loss = g.loss;
        model.log.push_back(std::move(entry));
    }
    model.params = f0.with_tensors(theta);
    return model;
}

MlpParams few_shot_adapt(const MlpParams& model, const LabeledBatch& support, double alpha, int steps) {
    return inner_adapt(model, support, alpha, steps);
}

void write_meta_log_csv(std::ostream& out, std::span<const MetaLogEntry> log) {
    out << "epoch,meta_loss,task_ids\n";
    for (const auto& e : log) {
        out << e.epoch << ',' << format_double(e.loss) << ',';
        for (std::size_t i = 0; i < e.task_ids.size(); ++i) out << (i ? ";" : "") << e.task_ids[i];
        out << '\n';
    }
}

void write_meta_log_csv(const std::filesystem::path& path, std::span<const MetaLogEntry> log) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_meta_log_csv(out, log);
}

}  // namespace lsm
