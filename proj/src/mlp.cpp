#include "lsm/mlp.hpp"

#include "lsm/error.hpp"

#include <algorithm>
#include <cmath>

namespace lsm {

std::string to_string(Activation a) {
    switch (a) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    }
    return "unknown";
}

Activation activation_from_string(const std::string& name) {
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "relu") return Activation::relu;
    if (name == "identity") return Activation::identity;
    throw DataError("unknown activation '" + name + "'");
}

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

void MlpParams::validate() const {
    if (layers.empty()) throw ShapeError("mlp: no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.bias.rows() != 1 || l.bias.cols() != l.out_dim()) {
            throw ShapeError("mlp: layer " + std::to_string(i) + " bias must be 1x" +
                             std::to_string(l.out_dim()));
        }
        if (i + 1 < layers.size() && layers[i + 1].in_dim() != l.out_dim()) {
            throw ShapeError("mlp: layer " + std::to_string(i) + " output dim " +
                             std::to_string(l.out_dim()) + " does not match next input dim " +
                             std::to_string(layers[i + 1].in_dim()));
        }
    }
    const auto& head = layers.back();
    if (head.out_dim() != 1 || head.activation != Activation::sigmoid) {
        throw ShapeError("mlp: output layer must be a single sigmoid unit");
    }
}

ParamList MlpParams::tensors() const {
    ParamList out;
    out.reserve(layers.size() * 2);
    for (const auto& l : layers) {
        out.push_back(l.weight);
        out.push_back(l.bias);
    }
    return out;
}

MlpParams MlpParams::with_tensors(const ParamList& tensors) const {
    if (tensors.size() != layers.size() * 2) throw ShapeError("mlp: tensor count mismatch");
    MlpParams out = *this;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Matrix& w = tensors[2 * i];
        const Matrix& b = tensors[2 * i + 1];
        if (w.rows() != layers[i].weight.rows() || w.cols() != layers[i].weight.cols() ||
            b.rows() != layers[i].bias.rows() || b.cols() != layers[i].bias.cols()) {
            throw ShapeError("mlp: tensor shape mismatch at layer " + std::to_string(i));
        }
        out.layers[i].weight = w;
        out.layers[i].bias = b;
    }
    return out;
}

std::vector<Activation> MlpParams::activations() const {
    std::vector<Activation> acts;
    acts.reserve(layers.size());
    for (const auto& l : layers) acts.push_back(l.activation);
    return acts;
}

DenseLayer glorot_layer(Eigen::Index in, Eigen::Index out, Activation act, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer layer;
    layer.weight.resize(out, in);
    for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
    }
    layer.bias = Matrix::Zero(1, out);
    layer.activation = act;
    return layer;
}

MlpParams make_mlp(Eigen::Index input_dim, std::span<const Eigen::Index> hidden, Activation hidden_act,
                   Rng& rng) {
    MlpParams params;
    Eigen::Index in = input_dim;
    for (const Eigen::Index h : hidden) {
        params.layers.push_back(glorot_layer(in, h, hidden_act, rng));
        in = h;
    }
    params.layers.push_back(glorot_layer(in, 1, Activation::sigmoid, rng));
    return params;
}

namespace {

Matrix activate(Matrix z, Activation act) {
    switch (act) {
    case Activation::sigmoid: return sigmoid(z);
    case Activation::relu: return z.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
    case Activation::identity: return z;
    }
    return z;
}

Matrix run_layers(const MlpParams& params, const Matrix& x, std::size_t count) {
    Matrix h = x;
    for (std::size_t i = 0; i < count; ++i) {
        const auto& l = params.layers[i];
        h = apply_layer(l, h);
    }
    return h;
}

void check_input(const MlpParams& params, Eigen::Index cols) {
    if (params.layers.empty()) throw ShapeError("mlp: no layers");
    if (cols != params.input_dim()) {
        throw ShapeError("mlp: input dimension " + std::to_string(cols) + " does not match " +
                         std::to_string(params.input_dim()));
    }
}

}  // namespace

Matrix apply_layer(const DenseLayer& layer, const Matrix& x) {
    return activate(affine(x, layer.weight, layer.bias), layer.activation);
}

Vector forward_batch(const MlpParams& params, const Matrix& x) {
    check_input(params, x.cols());
    const Matrix out = run_layers(params, x, params.layers.size());
    return out.col(0);
}

double forward(const MlpParams& params, const Vector& x) {
    const Matrix row = x.transpose();
    return forward_batch(params, row)(0);
}

Matrix hidden_features(const MlpParams& params, const Matrix& x) {
    check_input(params, x.cols());
    return run_layers(params, x, params.layers.size() - 1);
}

double cross_entropy(double p, double y) {
    const double q = std::clamp(p, kLogClamp, 1.0 - kLogClamp);
    return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

double mean_cross_entropy(const Vector& p, const Vector& y) {
    if (p.size() != y.size()) throw ShapeError("cross_entropy: size mismatch");
    if (p.size() == 0) throw ArgumentError("cross_entropy: empty batch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) total += cross_entropy(p(i), y(i));
    return total / static_cast<double>(p.size());
}

Var mlp_forward(Tape& tape, std::span<const Var> params, std::span<const Activation> acts, Var x) {
    if (params.size() != acts.size() * 2) throw ShapeError("mlp_forward: parameter count mismatch");
    Var h = x;
    const Eigen::Index n = tape.value(x).rows();
    for (std::size_t i = 0; i < acts.size(); ++i) {
        const Var z = tape.add(tape.matmul(h, tape.transpose(params[2 * i])),
                               tape.broadcast_rows(params[2 * i + 1], n));
        switch (acts[i]) {
        case Activation::sigmoid: h = tape.sigmoid(z); break;
        case Activation::relu: h = tape.relu(z); break;
        case Activation::identity: h = z; break;
        }
    }
    return h;
}

Var mlp_loss(Tape& tape, std::span<const Var> params, std::span<const Activation> acts,
             const LabeledBatch& batch) {
    if (batch.empty()) throw ArgumentError("loss: empty batch");
    const Var x = tape.constant(batch.x);
    const Var p = tape.clamp(mlp_forward(tape, params, acts, x), kLogClamp, 1.0 - kLogClamp);
    const Matrix y = batch.y;
    const Var pos = tape.cmul(tape.constant(y), tape.log(p));
    const Var neg = tape.cmul(tape.constant((1.0 - y.array()).matrix()), tape.log(tape.affine(p, -1.0, 1.0)));
    return tape.scale(tape.sum(tape.add(pos, neg)), -1.0 / static_cast<double>(batch.size()));
}

MlpParams grad(const MlpParams& params, const LabeledBatch& batch) {
    if (batch.empty()) throw ArgumentError("grad: empty batch");
    check_input(params, batch.x.cols());
    Tape tape;
    std::vector<Var> vars;
    for (auto& t : params.tensors()) vars.push_back(tape.variable(std::move(t)));
    const auto acts = params.activations();
    const Var loss = mlp_loss(tape, vars, acts, batch);
    return params.with_tensors(tape.gradient(loss, vars));
}

ParamList sgd_step(const ParamList& params, const ParamList& gradient, double alpha) {
    if (!same_shapes(params, gradient)) throw ShapeError("sgd_step: gradient shape mismatch");
    ParamList out;
    out.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) out.push_back(params[i] - alpha * gradient[i]);
    return out;
}

MlpParams sgd_step(const MlpParams& params, const MlpParams& gradient, double alpha) {
    return params.with_tensors(sgd_step(params.tensors(), gradient.tensors(), alpha));
}

}  // namespace lsm
