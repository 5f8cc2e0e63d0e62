#pragma once

#include "lsm/linalg.hpp"
#include "lsm/rng.hpp"
#include "lsm/tape.hpp"

#include <span>
#include <string>
#include <vector>

namespace lsm {

enum class Activation { sigmoid, relu, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Fully connected layer computing act(W x + b); weight is (out x in), bias is 1 x out.
struct DenseLayer {
    Matrix weight;
    Matrix bias;
    Activation activation = Activation::sigmoid;

    Eigen::Index in_dim() const { return weight.cols(); }
    Eigen::Index out_dim() const { return weight.rows(); }
};

/// Binary classifier parameters. The last layer is a single sigmoid unit.
struct MlpParams {
    std::vector<DenseLayer> layers;

    Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().in_dim(); }
    std::size_t parameter_count() const;

    /// Throws ShapeError when layer dimensions do not chain or the head is not 1-unit sigmoid.
    void validate() const;

    ParamList tensors() const;
    MlpParams with_tensors(const ParamList& tensors) const;
    std::vector<Activation> activations() const;
};

/// Samples as rows of x with labels in y (0 or 1).
struct LabeledBatch {
    Matrix x;
    Vector y;

    Eigen::Index size() const { return x.rows(); }
    bool empty() const { return x.rows() == 0; }
};

/// Uniform initialization in +-sqrt(6 / (fan_in + fan_out)).
DenseLayer glorot_layer(Eigen::Index in, Eigen::Index out, Activation act, Rng& rng);

/// Builds an MLP with the given hidden sizes and a 1-unit sigmoid head.
MlpParams make_mlp(Eigen::Index input_dim, std::span<const Eigen::Index> hidden, Activation hidden_act,
                   Rng& rng);

/// act(x W^T + b) for a batch of rows.
Matrix apply_layer(const DenseLayer& layer, const Matrix& x);

double forward(const MlpParams& params, const Vector& x);
Vector forward_batch(const MlpParams& params, const Matrix& x);

/// Activations of the last hidden layer (input to the head), one row per sample.
Matrix hidden_features(const MlpParams& params, const Matrix& x);

inline constexpr double kLogClamp = 1e-12;

double cross_entropy(double p, double y);
double mean_cross_entropy(const Vector& p, const Vector& y);

/// Records the MLP forward pass and the mean clamped cross-entropy on the tape.
/// `params` holds [W0, b0, W1, b1, ...] as returned by MlpParams::tensors().
Var mlp_loss(Tape& tape, std::span<const Var> params, std::span<const Activation> acts,
             const LabeledBatch& batch);

/// Taped probabilities for a batch (n x 1).
Var mlp_forward(Tape& tape, std::span<const Var> params, std::span<const Activation> acts, Var x);

/// Gradient of the mean cross-entropy, in the shape of the parameters.
MlpParams grad(const MlpParams& params, const LabeledBatch& batch);

ParamList sgd_step(const ParamList& params, const ParamList& gradient, double alpha);
MlpParams sgd_step(const MlpParams& params, const MlpParams& gradient, double alpha);

}  // namespace lsm
