#pragma once

#include "lsm/linalg.hpp"
#include "lsm/mlp.hpp"
#include "lsm/rng.hpp"

#include <cstdint>
#include <vector>

namespace lsm {

/// Single-hidden-layer denoising autoencoder with sigmoid encoder and decoder.
struct DaeParams {
    DenseLayer encoder;  // in -> hidden
    DenseLayer decoder;  // hidden -> in
    double corruption_rate = 0.2;

    ParamList tensors() const { return {encoder.weight, encoder.bias, decoder.weight, decoder.bias}; }
    DaeParams with_tensors(const ParamList& t) const;
    /// Throws ShapeError unless the decoder maps back onto the encoder input.
    void validate() const;
};

DaeParams make_dae(Eigen::Index input, Eigen::Index hidden, double corruption_rate, Rng& rng);

/// Each entry is kept (1) with probability 1 - rate and zeroed (0) otherwise.
Matrix corruption_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng);

struct DaeLoss {
    double loss = 0.0;
    ParamList gradient;  // [W_enc, b_enc, W_dec, b_dec]
};

/// Mean squared error between x and the reconstruction of x * mask, with its gradient.
DaeLoss dae_loss_and_grad_masked(const DaeParams& dae, const Matrix& x, const Matrix& mask);
DaeLoss dae_loss_and_grad(const DaeParams& dae, const Matrix& x, Rng& rng);

Matrix encode(const DaeParams& dae, const Matrix& x);

struct DaeTrainConfig {
    int epochs = 20;
    double lr = 1e-5;
    int batch_size = 32;
};

struct DaeTrainResult {
    DaeParams params;
    std::vector<double> losses;  // mean minibatch loss per epoch
};

DaeTrainResult train_dae(DaeParams dae, const Matrix& data, const DaeTrainConfig& config, std::uint64_t seed);

}  // namespace lsm
