#pragma once

#include "lsm/linalg.hpp"
#include "lsm/mlp.hpp"
#include "lsm/rng.hpp"

#include <cstdint>
#include <vector>

namespace lsm {

/// Bernoulli-Bernoulli RBM. Visible values in [0, 1] are read as probabilities.
struct RbmParams {
    Matrix w;      // visible x hidden
    Matrix b_vis;  // 1 x visible
    Matrix b_hid;  // 1 x hidden

    Eigen::Index visible() const { return w.rows(); }
    Eigen::Index hidden() const { return w.cols(); }
    ParamList tensors() const { return {w, b_vis, b_hid}; }
    static RbmParams from_tensors(const ParamList& t);
};

/// Glorot-uniform weights, zero biases.
RbmParams make_rbm(Eigen::Index visible, Eigen::Index hidden, Rng& rng);

/// The v -> h direction as a sigmoid dense layer (weight = W^T, bias = b_hid).
DenseLayer hidden_layer(const RbmParams& rbm);
/// The h -> v direction (weight = W, bias = b_vis).
DenseLayer visible_layer(const RbmParams& rbm);

Matrix hidden_probs(const RbmParams& rbm, const Matrix& v);
Matrix visible_probs(const RbmParams& rbm, const Matrix& h);

/// Independent Bernoulli draws, row-major.
Matrix sample_bernoulli(const Matrix& p, Rng& rng);

/// Log-likelihood ascent direction, averaged over the batch.
struct RbmGradient {
    Matrix w;
    Matrix b_vis;
    Matrix b_hid;
};

/// CD-1 estimate for a given negative sample v': <v p(h|v)> - <v' p(h|v')>.
RbmGradient cd1_gradient_from_samples(const RbmParams& rbm, const Matrix& v, const Matrix& v_neg);

/// Samples h ~ p(h|v) and v' ~ p(v|h), then applies the deterministic estimate.
/// Throws ArgumentError for values outside [0, 1].
RbmGradient cd1_gradient(const RbmParams& rbm, const Matrix& v, Rng& rng);

/// Mean squared error between v and p(v|h) for one sampled h per row.
double reconstruction_error(const RbmParams& rbm, const Matrix& v, Rng& rng);

struct RbmTrainConfig {
    int epochs = 20;
    double lr = 1e-3;
    int batch_size = 32;
};

struct RbmTrainResult {
    RbmParams params;
    std::vector<double> reconstruction_errors;  // mean over each epoch's minibatches
};

/// Adam on the negated CD-1 direction over shuffled minibatches.
RbmTrainResult train_rbm(RbmParams rbm, const Matrix& data, const RbmTrainConfig& config, std::uint64_t seed);

}  // namespace lsm
