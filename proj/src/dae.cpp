#include "lsm/dae.hpp"

#include "lsm/error.hpp"
#include "lsm/optim.hpp"
#include "lsm/tape.hpp"

#include <array>
#include <cmath>
#include <numeric>

namespace lsm {

DaeParams DaeParams::with_tensors(const ParamList& t) const {
    if (t.size() != 4) throw ShapeError("dae: expected 4 tensors");
    DaeParams out = *this;
    out.encoder.weight = t[0];
    out.encoder.bias = t[1];
    out.decoder.weight = t[2];
    out.decoder.bias = t[3];
    out.validate();
    return out;
}

void DaeParams::validate() const {
    if (encoder.bias.rows() != 1 || encoder.bias.cols() != encoder.out_dim() || decoder.bias.rows() != 1 ||
        decoder.bias.cols() != decoder.out_dim()) {
        throw ShapeError("dae: bias shapes do not match the weights");
    }
    if (decoder.in_dim() != encoder.out_dim() || decoder.out_dim() != encoder.in_dim()) {
        throw ShapeError("dae: decoder does not map back onto the encoder input");
    }
    if (!(corruption_rate >= 0.0 && corruption_rate < 1.0)) throw ConfigError("dae: corruption_rate must be in [0, 1)");
}

DaeParams make_dae(Eigen::Index input, Eigen::Index hidden, double corruption_rate, Rng& rng) {
    DaeParams d;
    d.encoder = glorot_layer(input, hidden, Activation::sigmoid, rng);
    d.decoder = glorot_layer(hidden, input, Activation::sigmoid, rng);
    d.corruption_rate = corruption_rate;
    d.validate();
    return d;
}

Matrix corruption_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.bernoulli(rate) ? 0.0 : 1.0;
    return m;
}

DaeLoss dae_loss_and_grad_masked(const DaeParams& dae, const Matrix& x, const Matrix& mask) {
    dae.validate();
    if (x.rows() == 0) throw ArgumentError("dae: empty batch");
    if (x.cols() != dae.encoder.in_dim()) throw ShapeError("dae: input dimension mismatch");
    if (mask.rows() != x.rows() || mask.cols() != x.cols()) throw ShapeError("dae: mask shape mismatch");
    Tape tape;
    std::vector<Var> vars;
    for (auto& t : dae.tensors()) vars.push_back(tape.variable(std::move(t)));
    const std::array<Activation, 2> acts{Activation::sigmoid, Activation::sigmoid};
    const Var z = mlp_forward(tape, vars, acts, tape.constant(x.cwiseProduct(mask)));
    const Var diff = tape.sub(z, tape.constant(x));
    const Var loss = tape.scale(tape.sum(tape.cmul(diff, diff)), 1.0 / static_cast<double>(x.size()));
    DaeLoss out;
    out.loss = tape.value(loss)(0, 0);
    out.gradient = tape.gradient(loss, vars);
    return out;
}

DaeLoss dae_loss_and_grad(const DaeParams& dae, const Matrix& x, Rng& rng) {
    return dae_loss_and_grad_masked(dae, x, corruption_mask(x.rows(), x.cols(), dae.corruption_rate, rng));
}

Matrix encode(const DaeParams& dae, const Matrix& x) { return apply_layer(dae.encoder, x); }

DaeTrainResult train_dae(DaeParams dae, const Matrix& data, const DaeTrainConfig& config, std::uint64_t seed) {
    if (data.rows() == 0) throw ArgumentError("train_dae: no data");
    if (config.batch_size < 1) throw ConfigError("train_dae: batch_size must be >= 1");
    if (config.epochs < 0) throw ConfigError("train_dae: epochs must be >= 0");
    Rng rng(seed);
    ParamList params = dae.tensors();
    AdamState adam = AdamState::zeros_like(params);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    DaeTrainResult result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            Matrix x(static_cast<Eigen::Index>(end - start), data.cols());
            for (std::size_t r = start; r < end; ++r) x.row(static_cast<Eigen::Index>(r - start)) = data.row(order[r]);
            const DaeLoss l = dae_loss_and_grad(dae.with_tensors(params), x, rng);
            if (!std::isfinite(l.loss)) throw DivergenceError("train_dae: non-finite loss at epoch " + std::to_string(epoch));
            adam_step(adam, params, l.gradient, config.lr);
            total += l.loss;
            ++batches;
        }
        result.losses.push_back(total / static_cast<double>(batches));
    }
    result.params = dae.with_tensors(params);
    return result;
}

}  // namespace lsm
