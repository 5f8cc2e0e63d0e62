#include "lsm/meta_grad.hpp"

#include "lsm/error.hpp"

#include <cmath>

namespace lsm {

std::string to_string(GradMode mode) {
    return mode == GradMode::second_order ? "second_order" : "first_order";
}

GradMode grad_mode_from_string(const std::string& name) {
    if (name == "second_order") return GradMode::second_order;
    if (name == "first_order") return GradMode::first_order;
    throw ConfigError("unknown grad_mode '" + name + "' (expected second_order or first_order)");
}

LossFn mlp_loss_fn(std::vector<Activation> acts) {
    return [acts = std::move(acts)](Tape& tape, std::span<const Var> params, const LabeledBatch& batch) {
        return mlp_loss(tape, params, acts, batch);
    };
}

namespace {

std::vector<Var> leaves(Tape& tape, const ParamList& values) {
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const auto& v : values) vars.push_back(tape.variable(v));
    return vars;
}

}  // namespace

ParamList inner_sgd(const ParamList& theta, const LabeledBatch& support, double alpha, int steps,
                    const LossFn& loss) {
    if (steps < 0) throw ArgumentError("inner_sgd: negative step count");
    if (steps > 0 && support.empty()) throw ArgumentError("inner_sgd: empty support set");
    ParamList current = theta;
    Tape tape;
    for (int s = 0; s < steps; ++s) {
        tape.clear();
        const auto vars = leaves(tape, current);
        const auto g = tape.gradient(loss(tape, vars, support), vars);
        current = sgd_step(current, g, alpha);
    }
    return current;
}

MetaGradient meta_grad(const ParamList& theta, std::span<const WeightedTask> tasks, double alpha,
                       int inner_steps, GradMode mode, const LossFn& loss) {
    if (tasks.empty()) throw ArgumentError("meta_grad: empty task list");
    if (inner_steps < 0) throw ArgumentError("meta_grad: negative inner step count");
    double weight_sum = 0.0;
    for (const auto& t : tasks) weight_sum += t.weight;
    if (std::abs(weight_sum - 1.0) > 1e-9) {
        throw ArgumentError("meta_grad: task weights must sum to 1");
    }

    MetaGradient out;
    out.gradient = zeros_like(theta);
    out.task_losses.reserve(tasks.size());

    Tape tape;
    for (const auto& task : tasks) {
        tape.clear();
        ParamList task_grad;
        double query_loss = 0.0;
        if (mode == GradMode::second_order) {
            const auto theta_vars = leaves(tape, theta);
            std::vector<Var> current = theta_vars;
            for (int s = 0; s < inner_steps; ++s) {
                if (task.support.empty()) throw ArgumentError("meta_grad: empty support set");
                const auto g = tape.gradient_graph(loss(tape, current, task.support), current);
                for (std::size_t i = 0; i < current.size(); ++i) {
                    current[i] = tape.sub(current[i], tape.scale(g[i], alpha));
                }
            }
            const Var lq = loss(tape, current, task.query);
            query_loss = tape.value(lq)(0, 0);
            task_grad = tape.gradient(tape.scale(lq, task.weight), theta_vars);
        } else {
            const ParamList adapted = inner_sgd(theta, task.support, alpha, inner_steps, loss);
            const auto vars = leaves(tape, adapted);
            const Var lq = loss(tape, vars, task.query);
            query_loss = tape.value(lq)(0, 0);
            task_grad = tape.gradient(tape.scale(lq, task.weight), vars);
        }
        for (std::size_t i = 0; i < theta.size(); ++i) out.gradient[i] += task_grad[i];
        out.loss += task.weight * query_loss;
        out.task_losses.push_back(query_loss);
    }
    return out;
}

}  // namespace lsm
