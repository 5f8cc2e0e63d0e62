#pragma once

#include "lsm/dae.hpp"
#include "lsm/mlp.hpp"
#include "lsm/rbm.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace lsm {

struct PretrainConfig {
    std::array<Eigen::Index, 3> hidden{32, 64, 32};  // H1, H2, H3
    RbmTrainConfig rbm{20, 1e-3, 32};
    DaeTrainConfig dae{20, 1e-5, 32};
    double corruption_rate = 0.2;

    /// Throws ConfigError unless H1 >= input_dim and H2 >= H1.
    void validate(Eigen::Index input_dim) const;
};

struct PretrainStack {
    RbmParams rbm1;
    RbmParams rbm2;
    DaeParams dae;
    std::vector<double> rbm1_errors;
    std::vector<double> rbm2_errors;
    std::vector<double> dae_losses;
};

/// Untrained stack as greedy_pretrain would start from it.
PretrainStack init_stack(Eigen::Index input_dim, const PretrainConfig& config, std::uint64_t seed);

/// f_0: rbm1 and rbm2 hidden layers, the DAE encoder, and a Glorot 1-unit sigmoid head.
MlpParams export_initialization(const PretrainStack& stack, std::uint64_t seed);

struct PretrainResult {
    PretrainStack stack;
    MlpParams f0;
};

/// rbm1 on the data, rbm2 on p(h|v) of rbm1, the DAE on p(h|v) of rbm2.
PretrainResult greedy_pretrain(const Matrix& data, const PretrainConfig& config, std::uint64_t seed);

/// Logistic regression trained by full-batch Adam; returns accuracy on (eval_x, eval_y) at threshold 0.5.
double linear_probe_accuracy(const Matrix& train_x, const Vector& train_y, const Matrix& eval_x, const Vector& eval_y,
                             int epochs = 500, double lr = 0.05);

}  // namespace lsm
