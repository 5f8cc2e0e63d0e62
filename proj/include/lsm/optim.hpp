#pragma once

#include "lsm/linalg.hpp"

#include <cstdint>

namespace lsm {

/// Bias-corrected Adam moments for a flat parameter list.
struct AdamState {
    ParamList first_moment;
    ParamList second_moment;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState zeros_like(const ParamList& params);
};

/// One Adam update: moments in `state` advance, `params` move against `gradient`.
void adam_step(AdamState& state, ParamList& params, const ParamList& gradient, double lr);

}  // namespace lsm
