#include "lsm/rbm.hpp"

#include "lsm/error.hpp"
#include "lsm/optim.hpp"

#include <cmath>
#include <numeric>

namespace lsm {

RbmParams RbmParams::from_tensors(const ParamList& t) {
    if (t.size() != 3) throw ShapeError("rbm: expected 3 tensors");
    RbmParams p{t[0], t[1], t[2]};
    if (p.b_vis.rows() != 1 || p.b_vis.cols() != p.w.rows() || p.b_hid.rows() != 1 || p.b_hid.cols() != p.w.cols()) {
        throw ShapeError("rbm: bias shapes do not match the weight matrix");
    }
    return p;
}

RbmParams make_rbm(Eigen::Index visible, Eigen::Index hidden, Rng& rng) {
    if (visible < 1 || hidden < 1) throw ArgumentError("rbm: layer sizes must be positive");
    const DenseLayer l = glorot_layer(hidden, visible, Activation::sigmoid, rng);
    return {l.weight, Matrix::Zero(1, visible), Matrix::Zero(1, hidden)};
}

DenseLayer hidden_layer(const RbmParams& rbm) {
    return {rbm.w.transpose(), rbm.b_hid, Activation::sigmoid};
}

DenseLayer visible_layer(const RbmParams& rbm) {
    return {rbm.w, rbm.b_vis, Activation::sigmoid};
}

Matrix hidden_probs(const RbmParams& rbm, const Matrix& v) {
    if (v.cols() != rbm.visible()) throw ShapeError("rbm: visible dimension mismatch");
    return apply_layer(hidden_layer(rbm), v);
}

Matrix visible_probs(const RbmParams& rbm, const Matrix& h) {
    if (h.cols() != rbm.hidden()) throw ShapeError("rbm: hidden dimension mismatch");
    return apply_layer(visible_layer(rbm), h);
}

Matrix sample_bernoulli(const Matrix& p, Rng& rng) {
    Matrix s(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < p.size(); ++i) s.data()[i] = rng.bernoulli(p.data()[i]) ? 1.0 : 0.0;
    return s;
}

RbmGradient cd1_gradient_from_samples(const RbmParams& rbm, const Matrix& v, const Matrix& v_neg) {
    if (v.rows() == 0) throw ArgumentError("cd1: empty batch");
    if (v.rows() != v_neg.rows() || v.cols() != v_neg.cols()) throw ShapeError("cd1: negative sample shape mismatch");
    const double inv = 1.0 / static_cast<double>(v.rows());
    const Matrix ph = hidden_probs(rbm, v);
    const Matrix ph_neg = hidden_probs(rbm, v_neg);
    RbmGradient g;
    g.w = (v.transpose() * ph - v_neg.transpose() * ph_neg) * inv;
    g.b_vis = (v - v_neg).colwise().sum() * inv;
    g.b_hid = (ph - ph_neg).colwise().sum() * inv;
    return g;
}

namespace {

void check_unit_interval(const Matrix& v) {
    if (!((v.array() >= 0.0).all() && (v.array() <= 1.0).all())) {
        throw ArgumentError("rbm: visible values must lie in [0, 1]");
    }
}

}  // namespace

RbmGradient cd1_gradient(const RbmParams& rbm, const Matrix& v, Rng& rng) {
    check_unit_interval(v);
    const Matrix h = sample_bernoulli(hidden_probs(rbm, v), rng);
    const Matrix v_neg = sample_bernoulli(visible_probs(rbm, h), rng);
    return cd1_gradient_from_samples(rbm, v, v_neg);
}

double reconstruction_error(const RbmParams& rbm, const Matrix& v, Rng& rng) {
    check_unit_interval(v);
    const Matrix h = sample_bernoulli(hidden_probs(rbm, v), rng);
    return (v - visible_probs(rbm, h)).squaredNorm() / static_cast<double>(v.size());
}

RbmTrainResult train_rbm(RbmParams rbm, const Matrix& data, const RbmTrainConfig& config, std::uint64_t seed) {
    if (data.rows() == 0) throw ArgumentError("train_rbm: no data");
    if (config.batch_size < 1) throw ConfigError("train_rbm: batch_size must be >= 1");
    if (config.epochs < 0) throw ConfigError("train_rbm: epochs must be >= 0");
    check_unit_interval(data);
    Rng rng(seed);
    ParamList params = rbm.tensors();
    AdamState adam = AdamState::zeros_like(params);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.rows()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    RbmTrainResult result;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double err = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            Matrix v(static_cast<Eigen::Index>(end - start), data.cols());
            for (std::size_t r = start; r < end; ++r) v.row(static_cast<Eigen::Index>(r - start)) = data.row(order[r]);
            const RbmParams cur = RbmParams::from_tensors(params);
            const Matrix h = sample_bernoulli(hidden_probs(cur, v), rng);
            const Matrix pv = visible_probs(cur, h);
            err += (v - pv).squaredNorm();
            const RbmGradient g = cd1_gradient_from_samples(cur, v, sample_bernoulli(pv, rng));
            adam_step(adam, params, {-g.w, -g.b_vis, -g.b_hid}, config.lr);
        }
        result.reconstruction_errors.push_back(err / static_cast<double>(data.size()));
    }
    result.params = RbmParams::from_tensors(params);
    return result;
}

}  // namespace lsm
