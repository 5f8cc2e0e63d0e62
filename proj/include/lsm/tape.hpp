#pragma once

#include "lsm/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lsm {

/// Handle to a node on a Tape.
struct Var {
    int id = -1;
};

/// Reverse-mode differentiation tape over matrix-valued nodes.
///
/// Every backward rule is itself written in terms of taped operations, so a
/// gradient obtained with gradient_graph() is an ordinary node on the tape and
/// can be differentiated again. This is what makes exact second-order
/// meta-gradients possible.
///
/// Nodes are evaluated eagerly in insertion order. Node ids are stable until
/// truncate() is called.
class Tape {
public:
    enum class Op : std::uint8_t {
        leaf,
        matmul,
        transpose,
        add,
        sub,
        cmul,
        scale,          // alpha * x
        affine,         // alpha * x + beta, elementwise
        sigmoid,
        mask,           // x * aux, aux constant (relu, clamp derivatives)
        clamp,          // clamp(x, alpha, beta)
        log,
        reciprocal,
        sum,            // all entries -> 1x1
        fill,           // 1x1 -> rows x cols
        broadcast_rows, // 1xc -> rows x c
        sum_rows,       // r x c -> 1 x c
    };

    Var variable(Matrix value);
    Var constant(Matrix value);

    const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var cmul(Var a, Var b);
    Var scale(Var a, double alpha);
    Var affine(Var a, double alpha, double beta);
    Var sigmoid(Var a);
    Var relu(Var a);
    Var clamp(Var a, double lo, double hi);
    Var log(Var a);
    Var reciprocal(Var a);
    Var sum(Var a);
    Var fill(Var scalar, Eigen::Index rows, Eigen::Index cols);
    Var broadcast_rows(Var row, Eigen::Index rows);
    Var sum_rows(Var a);

    /// Gradients of a 1x1 output w.r.t. `wrt`, recorded as new tape nodes so
    /// they can be differentiated again.
    std::vector<Var> gradient_graph(Var output, std::span<const Var> wrt);

    /// Gradient values only; the temporary backward nodes are discarded.
    std::vector<Matrix> gradient(Var output, std::span<const Var> wrt);

    /// Re-evaluates every non-leaf node from the recorded operations and
    /// returns the recomputed values in node order.
    std::vector<Matrix> replay() const;

    std::size_t size() const { return nodes_.size(); }
    void truncate(std::size_t n) { nodes_.resize(n); }
    void clear() { nodes_.clear(); }

private:
    struct Node {
        Op op = Op::leaf;
        int lhs = -1;
        int rhs = -1;
        double alpha = 0.0;
        double beta = 0.0;
        Matrix aux;
        Matrix value;
        bool requires_grad = false;
    };

    Var push(Node node);
    const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
    Matrix evaluate(const Node& n, const std::vector<Matrix>* values) const;
    Var mask(Var a, Matrix m);
    void accumulate(std::vector<Var>& grads, int target, Var g);

    std::vector<Node> nodes_;
};

}  // namespace lsm
