#pragma once

#include "lsm/linalg.hpp"
#include "lsm/mlp.hpp"
#include "lsm/tape.hpp"

#include <functional>
#include <span>
#include <vector>

namespace lsm {

enum class GradMode { second_order, first_order };

std::string to_string(GradMode mode);
GradMode grad_mode_from_string(const std::string& name);

/// Scalar loss of a parameter list on a batch, recorded on a tape.
using LossFn = std::function<Var(Tape&, std::span<const Var>, const LabeledBatch&)>;

/// Cross-entropy loss of an MLP with the given layer activations.
LossFn mlp_loss_fn(std::vector<Activation> acts);

struct WeightedTask {
    LabeledBatch support;
    LabeledBatch query;
    double weight = 1.0;
};

struct MetaGradient {
    ParamList gradient;
    double loss = 0.0;               // sum_k w_k * L_query(theta'_k)
    std::vector<double> task_losses; // unweighted L_query(theta'_k)
};

/// `steps` full-batch SGD steps on the support loss. No graph is kept.
ParamList inner_sgd(const ParamList& theta, const LabeledBatch& support, double alpha, int steps,
                    const LossFn& loss);

/// Gradient of sum_k w_k L_query(theta'_k) with respect to theta, where theta'_k
/// is reached by `inner_steps` SGD steps of size alpha on task k's support set.
/// second_order differentiates through the inner trajectory; first_order
/// treats each inner gradient as a constant. Tasks are reduced in index order.
MetaGradient meta_grad(const ParamList& theta, std::span<const WeightedTask> tasks, double alpha,
                       int inner_steps, GradMode mode, const LossFn& loss);

}  // namespace lsm
