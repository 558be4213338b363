#include "prosub/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace prosub {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::linear: return "linear";
        case Activation::scaled_sigmoid2: return "scaled_sigmoid2";
    }
    return "?";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "linear") return Activation::linear;
    if (name == "scaled_sigmoid2") return Activation::scaled_sigmoid2;
    throw std::invalid_argument("unknown activation: " + name);
}

size_t Mlp::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

void Mlp::validate() const {
    if (layers.empty()) throw std::invalid_argument("Mlp: needs at least one layer");
    for (size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.bias.size() != l.out_dim()) {
            throw std::invalid_argument("Mlp: bias length mismatch at layer " + std::to_string(i));
        }
        if (l.dropout_rate < 0.0 || l.dropout_rate >= 1.0) {
            throw std::invalid_argument("Mlp: dropout_rate must be in [0,1)");
        }
        if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
            throw std::invalid_argument("Mlp: layer dims do not chain at layer " + std::to_string(i));
        }
    }
}

Matrix he_normal_init(size_t fan_in, size_t fan_out, Rng& rng) {
    if (fan_in == 0 || fan_out == 0) {
        throw std::invalid_argument("he_normal_init: zero fan dimension");
    }
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Matrix w(fan_in, fan_out);
    for (double& x : w.values()) x = rng.normal(0.0, stddev);
    return w;
}

Mlp make_mlp(size_t in_dim, const std::vector<size_t>& hidden, size_t out_dim,
             Activation hidden_act, Activation out_act, double dropout, Rng& rng) {
    Mlp net;
    size_t prev = in_dim;
    for (size_t width : hidden) {
        DenseLayer l;
        l.weights = he_normal_init(prev, width, rng);
        l.bias.assign(width, 0.0);
        l.activation = hidden_act;
        l.dropout_rate = dropout;
        net.layers.push_back(std::move(l));
        prev = width;
    }
    DenseLayer out;
    out.weights = he_normal_init(prev, out_dim, rng);
    out.bias.assign(out_dim, 0.0);
    out.activation = out_act;
    out.dropout_rate = 0.0;
    net.layers.push_back(std::move(out));
    net.validate();
    return net;
}

namespace {

inline double apply_act(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::linear: return z;
        case Activation::scaled_sigmoid2: return 2.0 / (1.0 + std::exp(-z));
    }
    return z;
}

inline double act_grad(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::linear: return 1.0;
        case Activation::scaled_sigmoid2: {
            double s = 1.0 / (1.0 + std::exp(-z));
            return 2.0 * s * (1.0 - s);
        }
    }
    return 1.0;
}

Matrix affine(const DenseLayer& l, const Matrix& x) {
    Matrix z = matmul(x, l.weights);
    for (size_t i = 0; i < z.rows(); ++i) {
        double* zi = z.row(i);
        for (size_t j = 0; j < z.cols(); ++j) zi[j] += l.bias[j];
    }
    return z;
}

}  // namespace

ForwardResult forward(const Mlp& net, const Matrix& batch, bool train_mode, Rng& rng) {
    net.validate();
    if (batch.cols() != net.input_dim()) {
        throw std::invalid_argument("forward: batch cols != network input dim");
    }
    ForwardResult res;
    res.tape.train_mode = train_mode;
    Matrix cur = batch;
    for (const auto& l : net.layers) {
        res.tape.inputs.push_back(cur);
        Matrix z = affine(l, cur);
        res.tape.pre.push_back(z);
        Matrix h(z.rows(), z.cols());
        for (size_t i = 0; i < z.size(); ++i) {
            h.values()[i] = apply_act(l.activation, z.values()[i]);
        }
        if (train_mode && l.dropout_rate > 0.0) {
            double keep = 1.0 - l.dropout_rate;
            Matrix mask(h.rows(), h.cols());
            for (size_t i = 0; i < h.size(); ++i) {
                double m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
                mask.values()[i] = m;
                h.values()[i] *= m;
            }
            res.tape.drop_mask.push_back(std::move(mask));
        } else {
            res.tape.drop_mask.emplace_back();
        }
        cur = std::move(h);
    }
    res.output = std::move(cur);
    return res;
}

Matrix forward_eval(const Mlp& net, const Matrix& batch) {
    Rng dummy(0);
    return forward(net, batch, /*train_mode=*/false, dummy).output;
}

double l2_loss(const Matrix& prediction, const Matrix& target) {
    if (!prediction.same_shape(target)) {
        throw std::invalid_argument("l2_loss: shape mismatch");
    }
    double sum = 0.0;
    for (size_t i = 0; i < prediction.size(); ++i) {
        double d = prediction.values()[i] - target.values()[i];
        sum += d * d;
    }
    return sum / static_cast<double>(prediction.size());
}

Matrix l2_loss_grad(const Matrix& prediction, const Matrix& target) {
    if (!prediction.same_shape(target)) {
        throw std::invalid_argument("l2_loss_grad: shape mismatch");
    }
    Matrix g(prediction.rows(), prediction.cols());
    double scale = 2.0 / static_cast<double>(prediction.size());
    for (size_t i = 0; i < prediction.size(); ++i) {
        g.values()[i] = scale * (prediction.values()[i] - target.values()[i]);
    }
    return g;
}

Gradients backward(const Mlp& net, const ForwardTape& tape, const Matrix& output_grad) {
    size_t L = net.layers.size();
    if (tape.inputs.size() != L || tape.pre.size() != L || tape.drop_mask.size() != L) {
        throw std::invalid_argument("backward: tape does not match network");
    }
    for (size_t li = 0; li < L; ++li) {
        if (tape.inputs[li].cols() != net.layers[li].in_dim() ||
            tape.pre[li].cols() != net.layers[li].out_dim()) {
            throw std::invalid_argument("backward: tape from a different network");
        }
    }
    if (!output_grad.same_shape(tape.pre.back())) {
        throw std::invalid_argument("backward: output_grad shape mismatch");
    }
    Gradients grads;
    grads.layers.resize(L);
    Matrix g = output_grad;  // gradient wrt layer output (post dropout)
    for (size_t li = L; li-- > 0;) {
        const DenseLayer& l = net.layers[li];
        const Matrix& z = tape.pre[li];
        const Matrix& drop = tape.drop_mask[li];
        if (drop.size() > 0) {
            for (size_t i = 0; i < g.size(); ++i) g.values()[i] *= drop.values()[i];
        }
        // through the activation
        Matrix dh = std::move(g);
        for (size_t i = 0; i < dh.size(); ++i) {
            dh.values()[i] *= act_grad(l.activation, z.values()[i]);
        }
        LayerGrads& lg = grads.layers[li];
        lg.d_weights = matmul_transa(tape.inputs[li], dh);
        lg.d_bias.assign(l.out_dim(), 0.0);
        for (size_t i = 0; i < dh.rows(); ++i) {
            const double* di = dh.row(i);
            for (size_t j = 0; j < dh.cols(); ++j) lg.d_bias[j] += di[j];
        }
        g = matmul_transb(dh, l.weights);
    }
    grads.d_input = std::move(g);
    return grads;
}

}  // namespace prosub
