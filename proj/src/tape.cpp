#include "lsm/tape.hpp"

#include "lsm/error.hpp"

#include <string>

namespace lsm {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

}  // namespace

Var Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return Var{static_cast<int>(nodes_.size() - 1)};
}

Var Tape::variable(Matrix value) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = true;
    return push(std::move(n));
}

Var Tape::constant(Matrix value) {
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Matrix Tape::evaluate(const Node& n, const std::vector<Matrix>* values) const {
    auto at = [&](int id) -> const Matrix& {
        return values ? (*values)[static_cast<std::size_t>(id)]
                      : nodes_[static_cast<std::size_t>(id)].value;
    };
    switch (n.op) {
    case Op::leaf: return n.value;
    case Op::matmul: return at(n.lhs) * at(n.rhs);
    case Op::transpose: return at(n.lhs).transpose();
    case Op::add: return at(n.lhs) + at(n.rhs);
    case Op::sub: return at(n.lhs) - at(n.rhs);
    case Op::cmul: return at(n.lhs).cwiseProduct(at(n.rhs));
    case Op::scale: return n.alpha * at(n.lhs);
    case Op::affine: return (n.alpha * at(n.lhs).array() + n.beta).matrix();
    case Op::sigmoid: return lsm::sigmoid(at(n.lhs));
    case Op::mask: return at(n.lhs).cwiseProduct(n.aux);
    case Op::clamp: return at(n.lhs).cwiseMax(n.alpha).cwiseMin(n.beta);
    case Op::log: return at(n.lhs).array().log().matrix();
    case Op::reciprocal: return at(n.lhs).cwiseInverse();
    case Op::sum: return Matrix::Constant(1, 1, at(n.lhs).sum());
    case Op::fill:
        return Matrix::Constant(static_cast<Eigen::Index>(n.alpha), static_cast<Eigen::Index>(n.beta),
                                at(n.lhs)(0, 0));
    case Op::broadcast_rows: return at(n.lhs).replicate(static_cast<Eigen::Index>(n.alpha), 1);
    case Op::sum_rows: return at(n.lhs).colwise().sum();
    }
    throw InternalError("tape: unknown op");
}

Var Tape::matmul(Var a, Var b) {
    if (value(a).cols() != value(b).rows()) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(value(a).cols()) +
                         " vs " + std::to_string(value(b).rows()) + ")");
    }
    Node n;
    n.op = Op::matmul;
    n.lhs = a.id;
    n.rhs = b.id;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::transpose(Var a) {
    Node n;
    n.op = Op::transpose;
    n.lhs = a.id;
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
    require_same_shape(value(a), value(b), "add");
    Node n;
    n.op = Op::add;
    n.lhs = a.id;
    n.rhs = b.id;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
    require_same_shape(value(a), value(b), "sub");
    Node n;
    n.op = Op::sub;
    n.lhs = a.id;
    n.rhs = b.id;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::cmul(Var a, Var b) {
    require_same_shape(value(a), value(b), "cmul");
    Node n;
    n.op = Op::cmul;
    n.lhs = a.id;
    n.rhs = b.id;
    n.requires_grad = requires_grad(a) || requires_grad(b);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::scale(Var a, double alpha) {
    Node n;
    n.op = Op::scale;
    n.lhs = a.id;
    n.alpha = alpha;
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::affine(Var a, double alpha, double beta) {
    Node n;
    n.op = Op::affine;
    n.lhs = a.id;
    n.alpha = alpha;
    n.beta = beta;
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::sigmoid(Var a) {
    Node n;
    n.op = Op::sigmoid;
    n.lhs = a.id;
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::mask(Var a, Matrix m) {
    require_same_shape(value(a), m, "mask");
    Node n;
    n.op = Op::mask;
    n.lhs = a.id;
    n.aux = std::move(m);
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::relu(Var a) {
    Matrix m = (value(a).array() > 0.0).cast<double>().matrix();
    return mask(a, std::move(m));
}

Var Tape::clamp(Var a, double lo, double hi) {
    Node n;
    n.op = Op::clamp;
    n.lhs = a.id;
    n.alpha = lo;
    n.beta = hi;
    n.aux = ((value(a).array() >= lo) && (value(a).array() <= hi)).cast<double>().matrix();
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::log(Var a) {
    Node n;
    n.op = Op::log;
    n.lhs = a.id;
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::reciprocal(Var a) {
    Node n;
    n.op = Op::reciprocal;
    n.lhs = a.id;
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::sum(Var a) {
    Node n;
    n.op = Op::sum;
    n.lhs = a.id;
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::fill(Var scalar, Eigen::Index rows, Eigen::Index cols) {
    if (value(scalar).size() != 1) throw ShapeError("fill: expects a 1x1 input");
    Node n;
    n.op = Op::fill;
    n.lhs = scalar.id;
    n.alpha = static_cast<double>(rows);
    n.beta = static_cast<double>(cols);
    n.requires_grad = requires_grad(scalar);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::broadcast_rows(Var row, Eigen::Index rows) {
    if (value(row).rows() != 1) throw ShapeError("broadcast_rows: expects a single row");
    Node n;
    n.op = Op::broadcast_rows;
    n.lhs = row.id;
    n.alpha = static_cast<double>(rows);
    n.requires_grad = requires_grad(row);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

Var Tape::sum_rows(Var a) {
    Node n;
    n.op = Op::sum_rows;
    n.lhs = a.id;
    n.requires_grad = requires_grad(a);
    n.value = evaluate(n, nullptr);
    return push(std::move(n));
}

void Tape::accumulate(std::vector<Var>& grads, int target, Var g) {
    auto& slot = grads[static_cast<std::size_t>(target)];
    slot = slot.id < 0 ? g : add(slot, g);
}

std::vector<Var> Tape::gradient_graph(Var output, std::span<const Var> wrt) {
    if (value(output).size() != 1) throw ShapeError("gradient: output must be a scalar");

    std::vector<Var> grads(static_cast<std::size_t>(output.id) + 1);
    grads[static_cast<std::size_t>(output.id)] = constant(Matrix::Ones(1, 1));

    for (int i = output.id; i >= 0; --i) {
        const Var g = grads[static_cast<std::size_t>(i)];
        if (g.id < 0) continue;
        // Copy the small fields: pushing new nodes may reallocate nodes_.
        const Op op = nodes_[static_cast<std::size_t>(i)].op;
        if (op == Op::leaf || !nodes_[static_cast<std::size_t>(i)].requires_grad) continue;
        const int lhs = nodes_[static_cast<std::size_t>(i)].lhs;
        const int rhs = nodes_[static_cast<std::size_t>(i)].rhs;
        const double alpha = nodes_[static_cast<std::size_t>(i)].alpha;
        const Var a{lhs};
        const Var b{rhs};
        const Var self{i};
        const bool need_a = lhs >= 0 && requires_grad(a);
        const bool need_b = rhs >= 0 && requires_grad(b);

        switch (op) {
        case Op::leaf: break;
        case Op::matmul:
            if (need_a) accumulate(grads, lhs, matmul(g, transpose(b)));
            if (need_b) accumulate(grads, rhs, matmul(transpose(a), g));
            break;
        case Op::transpose:
            if (need_a) accumulate(grads, lhs, transpose(g));
            break;
        case Op::add:
            if (need_a) accumulate(grads, lhs, g);
            if (need_b) accumulate(grads, rhs, g);
            break;
        case Op::sub:
            if (need_a) accumulate(grads, lhs, g);
            if (need_b) accumulate(grads, rhs, scale(g, -1.0));
            break;
        case Op::cmul:
            if (need_a) accumulate(grads, lhs, cmul(g, b));
            if (need_b) accumulate(grads, rhs, cmul(g, a));
            break;
        case Op::scale:
        case Op::affine:
            if (need_a) accumulate(grads, lhs, scale(g, alpha));
            break;
        case Op::sigmoid:
            // s' = s (1 - s), expressed on the output node so it stays differentiable.
            if (need_a) accumulate(grads, lhs, cmul(g, cmul(self, affine(self, -1.0, 1.0))));
            break;
        case Op::mask:
        case Op::clamp: {
            if (!need_a) break;
            Matrix m = nodes_[static_cast<std::size_t>(i)].aux;
            accumulate(grads, lhs, mask(g, std::move(m)));
            break;
        }
        case Op::log:
            if (need_a) accumulate(grads, lhs, cmul(g, reciprocal(a)));
            break;
        case Op::reciprocal:
            if (need_a) accumulate(grads, lhs, scale(cmul(g, cmul(self, self)), -1.0));
            break;
        case Op::sum:
            if (need_a) accumulate(grads, lhs, fill(g, value(a).rows(), value(a).cols()));
            break;
        case Op::fill:
            if (need_a) accumulate(grads, lhs, sum(g));
            break;
        case Op::broadcast_rows:
            if (need_a) accumulate(grads, lhs, sum_rows(g));
            break;
        case Op::sum_rows:
            if (need_a) accumulate(grads, lhs, broadcast_rows(g, value(a).rows()));
            break;
        }
    }

    std::vector<Var> out;
    out.reserve(wrt.size());
    for (const Var w : wrt) {
        const Var g = w.id <= output.id ? grads[static_cast<std::size_t>(w.id)] : Var{};
        out.push_back(g.id >= 0 ? g : constant(Matrix::Zero(value(w).rows(), value(w).cols())));
    }
    return out;
}

std::vector<Matrix> Tape::gradient(Var output, std::span<const Var> wrt) {
    const std::size_t mark = nodes_.size();
    const std::vector<Var> grads = gradient_graph(output, wrt);
    std::vector<Matrix> values;
    values.reserve(grads.size());
    for (const Var g : grads) values.push_back(value(g));
    truncate(mark);
    return values;
}

std::vector<Matrix> Tape::replay() const {
    std::vector<Matrix> values;
    values.reserve(nodes_.size());
    for (const Node& n : nodes_) values.push_back(evaluate(n, &values));
    return values;
}

}  // namespace lsm
