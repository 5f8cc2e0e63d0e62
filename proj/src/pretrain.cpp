#include "lsm/pretrain.hpp"

#include "lsm/error.hpp"
#include "lsm/optim.hpp"
#include "lsm/rng.hpp"

namespace lsm {

namespace {

enum Stream : std::uint64_t { rbm1_init = 1, rbm2_init, dae_init, head_init, rbm1_train, rbm2_train, dae_train };

}  // namespace

void PretrainConfig::validate(Eigen::Index input_dim) const {
    for (const auto h : hidden) {
        if (h < 1) throw ConfigError("pretrain: hidden sizes must be positive");
    }
    if (hidden[0] < input_dim) {
        throw ConfigError("pretrain: H1 (" + std::to_string(hidden[0]) + ") must be >= the band count (" +
                          std::to_string(input_dim) + ")");
    }
    if (hidden[1] < hidden[0]) throw ConfigError("pretrain: H2 must be >= H1");
    if (!(corruption_rate >= 0.0 && corruption_rate < 1.0)) throw ConfigError("pretrain: corruption_rate must be in [0, 1)");
    if (rbm.epochs < 0 || dae.epochs < 0) throw ConfigError("pretrain: epochs must be >= 0");
    if (!(rbm.lr > 0.0) || !(dae.lr > 0.0)) throw ConfigError("pretrain: learning rates must be > 0");
    if (rbm.batch_size < 1 || dae.batch_size < 1) throw ConfigError("pretrain: batch sizes must be >= 1");
}

PretrainStack init_stack(Eigen::Index input_dim, const PretrainConfig& config, std::uint64_t seed) {
    config.validate(input_dim);
    PretrainStack s;
    Rng r1(derive_seed(seed, rbm1_init));
    Rng r2(derive_seed(seed, rbm2_init));
    Rng r3(derive_seed(seed, dae_init));
    s.rbm1 = make_rbm(input_dim, config.hidden[0], r1);
    s.rbm2 = make_rbm(config.hidden[0], config.hidden[1], r2);
    s.dae = make_dae(config.hidden[1], config.hidden[2], config.corruption_rate, r3);
    return s;
}

MlpParams export_initialization(const PretrainStack& stack, std::uint64_t seed) {
    Rng rng(derive_seed(seed, head_init));
    MlpParams f0;
    f0.layers.push_back(hidden_layer(stack.rbm1));
    f0.layers.push_back(hidden_layer(stack.rbm2));
    f0.layers.push_back(stack.dae.encoder);
    f0.layers.push_back(glorot_layer(stack.dae.encoder.out_dim(), 1, Activation::sigmoid, rng));
    f0.validate();
    return f0;
}

PretrainResult greedy_pretrain(const Matrix& data, const PretrainConfig& config, std::uint64_t seed) {
    if (data.rows() == 0) throw ArgumentError("pretrain: no data");
    PretrainStack s = init_stack(data.cols(), config, seed);

    auto r1 = train_rbm(s.rbm1, data, config.rbm, derive_seed(seed, rbm1_train));
    s.rbm1 = std::move(r1.params);
    s.rbm1_errors = std::move(r1.reconstruction_errors);
    const Matrix h1 = hidden_probs(s.rbm1, data);

    auto r2 = train_rbm(s.rbm2, h1, config.rbm, derive_seed(seed, rbm2_train));
    s.rbm2 = std::move(r2.params);
    s.rbm2_errors = std::move(r2.reconstruction_errors);
    const Matrix h2 = hidden_probs(s.rbm2, h1);

    auto d = train_dae(s.dae, h2, config.dae, derive_seed(seed, dae_train));
    s.dae = std::move(d.params);
    s.dae_losses = std::move(d.losses);

    if (!all_finite(s.rbm1.tensors()) || !all_finite(s.rbm2.tensors()) || !all_finite(s.dae.tensors())) {
        throw DivergenceError("pretrain: non-finite parameters");
    }
    PretrainResult out;
    out.f0 = export_initialization(s, seed);
    out.stack = std::move(s);
    return out;
}

double linear_probe_accuracy(const Matrix& train_x, const Vector& train_y, const Matrix& eval_x, const Vector& eval_y,
                             int epochs, double lr) {
    if (train_x.rows() == 0 || eval_x.rows() == 0) throw ArgumentError("linear probe: empty data");
    MlpParams probe;
    probe.layers.push_back({Matrix::Zero(1, train_x.cols()), Matrix::Zero(1, 1), Activation::sigmoid});
    ParamList params = probe.tensors();
    AdamState adam = AdamState::zeros_like(params);
    const LabeledBatch batch{train_x, train_y};
    for (int e = 0; e < epochs; ++e) {
        adam_step(adam, params, grad(probe.with_tensors(params), batch).tensors(), lr);
    }
    const Vector p = forward_batch(probe.with_tensors(params), eval_x);
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < p.size(); ++i) correct += ((p(i) >= 0.5 ? 1.0 : 0.0) == eval_y(i)) ? 1u : 0u;
    return static_cast<double>(correct) / static_cast<double>(p.size());
}

}  // namespace lsm
