#pragma once

#include <vector>

#include "prosub/mlp.hpp"

namespace prosub {

// Moment accumulators are flattened in layer order, weights then bias.
struct AdamState {
    uint64_t step = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam_state(const Mlp& net, double lr = 1e-3);

// Standard bias-corrected update, in place. Rejects non-finite gradients with
// a diagnostic naming the offending layer.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

}  // namespace prosub
