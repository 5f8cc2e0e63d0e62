#include "doctest.h"

#include "fixtures.hpp"
#include "oracles.hpp"

#include "lsm/error.hpp"
#include "lsm/pretrain.hpp"

#include <cmath>

using namespace lsm;

namespace {

RbmParams zero_rbm(Eigen::Index v, Eigen::Index h) {
    return {Matrix::Zero(v, h), Matrix::Zero(1, v), Matrix::Zero(1, h)};
}

}  // namespace

TEST_CASE("zero rbm hidden probabilities") {
    Rng rng(1);
    const Matrix v = Matrix::Random(5, 3).cwiseAbs();
    const Matrix ph = hidden_probs(zero_rbm(3, 4), v);
    CHECK((ph.array() == 0.5).all());
}

TEST_CASE("cd1 with a frozen sample path") {
    Rng rng(2);
    RbmParams rbm = make_rbm(4, 3, rng);
    const Matrix v = Matrix::Random(6, 4).cwiseAbs();
    const RbmGradient g = cd1_gradient_from_samples(rbm, v, v);
    CHECK(g.w.isZero(0.0));
    CHECK(g.b_vis.isZero(0.0));
    CHECK(g.b_hid.isZero(0.0));
}

TEST_CASE("cd1 averages to the exact log-likelihood gradient on a 2x1 rbm") {
    RbmParams rbm{Matrix(2, 1), Matrix(1, 2), Matrix(1, 1)};
    rbm.w << 0.3, -0.2;
    rbm.b_vis << 0.1, -0.1;
    rbm.b_hid << 0.05;
    Matrix data(4, 2);
    data << 1, 0, 1, 1, 0, 1, 1, 0;
    const oracle::ExactGradient exact = oracle::enumerate_gradient(rbm, data);

    Rng rng(3);
    RbmGradient mean{Matrix::Zero(2, 1), Matrix::Zero(1, 2), Matrix::Zero(1, 1)};
    const int draws = 10000;
    for (int d = 0; d < draws; ++d) {
        const RbmGradient g = cd1_gradient(rbm, data, rng);
        mean.w += g.w / draws;
        mean.b_vis += g.b_vis / draws;
        mean.b_hid += g.b_hid / draws;
    }
    CHECK((mean.w - exact.w).cwiseAbs().maxCoeff() < 0.05);
    CHECK((mean.b_vis - exact.b_vis).cwiseAbs().maxCoeff() < 0.05);
    CHECK((mean.b_hid - exact.b_hid).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("cd1 visible bias at zero parameters") {
    Rng rng(4);
    Matrix v(8, 5);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform();
    const RbmParams rbm = zero_rbm(5, 3);
    Matrix mean = Matrix::Zero(1, 5);
    for (int d = 0; d < 10000; ++d) mean += cd1_gradient(rbm, v, rng).b_vis / 10000.0;
    const Matrix expected = v.colwise().mean().array() - 0.5;
    CHECK((mean - expected).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("cd1 rejects values outside the unit interval") {
    Rng rng(5);
    Matrix v = Matrix::Constant(2, 2, 0.5);
    v(1, 1) = 1.5;
    CHECK_THROWS_AS(cd1_gradient(zero_rbm(2, 2), v, rng), ArgumentError);
}

TEST_CASE("rbm training") {
    Rng rng(6);
    const LabeledBatch data = test::two_prototypes(rng, 1000, 0.1);
    const RbmParams init = make_rbm(8, 16, rng);

    RbmTrainConfig none;
    none.epochs = 0;
    const RbmTrainResult same = train_rbm(init, data.x, none, 1);
    CHECK(same.params.w == init.w);
    CHECK(same.reconstruction_errors.empty());

    const RbmTrainConfig cfg;
    const RbmTrainResult a = train_rbm(init, data.x, cfg, 7);
    const RbmTrainResult b = train_rbm(init, data.x, cfg, 7);
    CHECK(a.params.w == b.params.w);
    CHECK(a.reconstruction_errors.size() == 20);

    Rng e1(8), e2(8);
    const double before = reconstruction_error(init, data.x, e1);
    const double after = reconstruction_error(a.params, data.x, e2);
    MESSAGE("reconstruction error " << before << " -> " << after);
    CHECK(after <= 0.7 * before);
}

TEST_CASE("dae loss examples") {
    Rng rng(9);
    SUBCASE("all-zero parameters on 0.5 inputs") {
        DaeParams dae = make_dae(4, 3, 0.0, rng);
        dae = dae.with_tensors(zeros_like(dae.tensors()));
        const DaeLoss l = dae_loss_and_grad(dae, Matrix::Constant(5, 4, 0.5), rng);
        CHECK(l.loss == 0.0);
    }
    SUBCASE("a decoder that reproduces the batch") {
        DaeParams dae = make_dae(3, 2, 0.0, rng);
        Matrix x(4, 3);
        x.rowwise() = RowVector::LinSpaced(3, 0.2, 0.7);
        dae.decoder.weight.setZero();
        for (Eigen::Index j = 0; j < 3; ++j) dae.decoder.bias(0, j) = std::log(x(0, j) / (1.0 - x(0, j)));
        CHECK(dae_loss_and_grad(dae, x, rng).loss < 1e-30);
    }
}

TEST_CASE("dae gradient matches finite differences") {
    Rng rng(10);
    for (int trial = 0; trial < 10; ++trial) {
        DaeParams dae = make_dae(4, 4, 0.3, rng);
        Matrix x(6, 4);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform();
        const Matrix mask = corruption_mask(6, 4, 0.3, rng);
        const DaeLoss l = dae_loss_and_grad_masked(dae, x, mask);
        const ParamList fd = oracle::finite_difference(
            dae.tensors(), [&](const ParamList& p) { return dae_loss_and_grad_masked(dae.with_tensors(p), x, mask).loss; },
            1e-5);
        for (std::size_t t = 0; t < fd.size(); ++t) {
            for (Eigen::Index i = 0; i < fd[t].size(); ++i) {
                CHECK(oracle::relative_error(l.gradient[t].data()[i], fd[t].data()[i], 1e-7) < 1e-5);
            }
        }
    }
}

TEST_CASE("corruption mask rate") {
    Rng rng(11);
    const Matrix m = corruption_mask(200, 50, 0.2, rng);
    CHECK(std::abs(1.0 - m.mean() - 0.2) < 0.02);
    CHECK((m.array() * (1.0 - m.array()) == 0.0).all());
    CHECK(corruption_mask(3, 3, 0.0, rng).isOnes());
}

TEST_CASE("dae training lowers the loss") {
    Rng rng(12);
    const LabeledBatch data = test::two_prototypes(rng, 200, 0.1);
    const DaeParams dae = make_dae(8, 6, 0.2, rng);
    DaeTrainConfig cfg;
    cfg.lr = 1e-2;
    cfg.epochs = 30;
    const DaeTrainResult r = train_dae(dae, data.x, cfg, 3);
    CHECK(r.losses.back() < r.losses.front());
    CHECK(train_dae(dae, data.x, cfg, 3).params.encoder.weight == r.params.encoder.weight);
}

TEST_CASE("greedy pretraining export") {
    Rng rng(13);
    Matrix data(60, 16);
    for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = rng.uniform();
    PretrainConfig cfg;
    cfg.rbm.epochs = 2;
    cfg.dae.epochs = 2;
    const PretrainResult r = greedy_pretrain(data, cfg, 21);
    REQUIRE(r.f0.layers.size() == 4);
    CHECK(r.f0.layers[0].in_dim() == 16);
    CHECK(r.f0.layers[0].out_dim() == 32);
    CHECK(r.f0.layers[1].out_dim() == 64);
    CHECK(r.f0.layers[2].out_dim() == 32);
    CHECK(r.f0.layers[3].out_dim() == 1);
    CHECK(r.stack.rbm1_errors.size() == 2);

    MlpParams first;
    first.layers = {r.f0.layers[0], glorot_layer(32, 1, Activation::sigmoid, rng)};
    const Matrix via_f0 = hidden_features(first, data);
    const Matrix via_rbm = hidden_probs(r.stack.rbm1, data);
    CHECK((via_f0.array() == via_rbm.array()).all());

    const PretrainResult again = greedy_pretrain(data, cfg, 21);
    for (std::size_t l = 0; l < 4; ++l) CHECK(again.f0.layers[l].weight == r.f0.layers[l].weight);

    PretrainConfig frozen = cfg;
    frozen.rbm.epochs = 0;
    frozen.dae.epochs = 0;
    const MlpParams untrained = export_initialization(init_stack(16, frozen, 21), 21);
    const PretrainResult z = greedy_pretrain(data, frozen, 21);
    for (std::size_t l = 0; l < 4; ++l) {
        CHECK(z.f0.layers[l].weight == untrained.layers[l].weight);
        CHECK(z.f0.layers[l].bias == untrained.layers[l].bias);
    }

    PretrainConfig narrow = cfg;
    narrow.hidden = {8, 64, 32};
    CHECK_THROWS_AS(greedy_pretrain(data, narrow, 1), ConfigError);
    narrow.hidden = {32, 16, 32};
    CHECK_THROWS_AS(greedy_pretrain(data, narrow, 1), ConfigError);
}

TEST_CASE("pretrained features stay linearly separable") {
    Rng rng(14);
    const LabeledBatch data = test::two_prototypes(rng, 400, 0.2);
    const LabeledBatch held_out = test::two_prototypes(rng, 2000, 0.2);
    const PretrainResult r = greedy_pretrain(data.x, PretrainConfig{}, 5);
    const double raw = linear_probe_accuracy(data.x, data.y, held_out.x, held_out.y, 1000);
    const double pre = linear_probe_accuracy(hidden_features(r.f0, data.x), data.y,
                                             hidden_features(r.f0, held_out.x), held_out.y, 1000);
    MESSAGE("held-out linear probe accuracy raw " << raw << ", pretrained " << pre);
    CHECK(pre >= raw);
}
