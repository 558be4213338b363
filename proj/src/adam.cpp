#include "prosub/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace prosub {

AdamState make_adam_state(const Mlp& net, double lr) {
    AdamState s;
    s.lr = lr;
    s.first_moment.assign(net.param_count(), 0.0);
    s.second_moment.assign(net.param_count(), 0.0);
    return s;
}

namespace {

void update_span(double* params, const double* grad, size_t n, AdamState& st,
                 size_t offset, double bc1, double bc2, const char* where, size_t layer) {
    for (size_t i = 0; i < n; ++i) {
        double g = grad[i];
        if (!std::isfinite(g)) {
            throw std::runtime_error("adam_step: non-finite gradient in layer " +
                                     std::to_string(layer) + " " + where);
        }
        double& m = st.first_moment[offset + i];
        double& v = st.second_moment[offset + i];
        m = st.beta1 * m + (1.0 - st.beta1) * g;
        v = st.beta2 * v + (1.0 - st.beta2) * g * g;
        double mhat = m / bc1;
        double vhat = v / bc2;
        params[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

}  // namespace

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
    if (grads.layers.size() != net.layers.size()) {
        throw std::invalid_argument("adam_step: gradient/network layer count mismatch");
    }
    if (state.first_moment.size() != net.param_count()) {
        throw std::invalid_argument("adam_step: state does not match network parameters");
    }
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    size_t off = 0;
    for (size_t li = 0; li < net.layers.size(); ++li) {
        DenseLayer& l = net.layers[li];
        const LayerGrads& lg = grads.layers[li];
        if (!lg.d_weights.same_shape(l.weights) || lg.d_bias.size() != l.bias.size()) {
            throw std::invalid_argument("adam_step: gradient shape mismatch at layer " +
                                        std::to_string(li));
        }
        update_span(l.weights.values().data(), lg.d_weights.values().data(),
                    l.weights.size(), state, off, bc1, bc2, "weights", li);
        off += l.weights.size();
        update_span(l.bias.data(), lg.d_bias.data(), l.bias.size(), state, off, bc1, bc2,
                    "bias", li);
        off += l.bias.size();
    }
}

}  // namespace prosub
