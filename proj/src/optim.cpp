#include "lsm/optim.hpp"

#include "lsm/error.hpp"

#include <cmath>

namespace lsm {

AdamState AdamState::zeros_like(const ParamList& params) {
    AdamState s;
    s.first_moment = lsm::zeros_like(params);
    s.second_moment = lsm::zeros_like(params);
    return s;
}

void adam_step(AdamState& state, ParamList& params, const ParamList& gradient, double lr) {
    if (!same_shapes(params, gradient) || !same_shapes(params, state.first_moment) ||
        !same_shapes(params, state.second_moment)) {
        throw ShapeError("adam_step: state, params and gradient shapes differ");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto m = state.first_moment[i].array();
        auto v = state.second_moment[i].array();
        const auto g = gradient[i].array();
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.square();
        params[i].array() -= lr * (m / c1) / ((v / c2).sqrt() + state.epsilon);
    }
}

}  // namespace lsm
