#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prosub/matrix.hpp"
#include "prosub/rng.hpp"

namespace prosub {

enum class Activation : uint32_t {
    relu = 0,
    linear = 1,
    // 2*sigmoid, range (0,2); used by the scoring head so a zero pre-activation
    // scores exactly 1.
    scaled_sigmoid2 = 2,
};

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

struct DenseLayer {
    Matrix weights;             // in x out
    std::vector<double> bias;   // out
    Activation activation = Activation::linear;
    double dropout_rate = 0.0;  // applied to this layer's output, train mode only

    size_t in_dim() const { return weights.rows(); }
    size_t out_dim() const { return weights.cols(); }
};

struct Mlp {
    std::vector<DenseLayer> layers;

    size_t input_dim() const { return layers.front().in_dim(); }
    size_t output_dim() const { return layers.back().out_dim(); }
    size_t param_count() const;
    void validate() const;  // >=1 layer, dims chain, dropout < 1
};

// Entries ~ normal(0, sqrt(2/fan_in)); fan_in = shape rows.
Matrix he_normal_init(size_t fan_in, size_t fan_out, Rng& rng);

// hidden layers use `hidden_act` + `dropout`, output layer is clean.
Mlp make_mlp(size_t in_dim, const std::vector<size_t>& hidden, size_t out_dim,
             Activation hidden_act, Activation out_act, double dropout, Rng& rng);

// Records everything backward() needs. Valid only for the forward call that
// produced it.
struct ForwardTape {
    std::vector<Matrix> inputs;      // input to each layer
    std::vector<Matrix> pre;         // pre-activation z
    std::vector<Matrix> drop_mask;   // empty when no dropout was applied
    bool train_mode = false;
};

struct ForwardResult {
    Matrix output;
    ForwardTape tape;
};

// Dropout uses inverted scaling (kept units divided by keep prob) so the
// eval-mode pass is the plain affine chain.
ForwardResult forward(const Mlp& net, const Matrix& batch, bool train_mode, Rng& rng);

// Eval-mode forward without tape bookkeeping.
Matrix forward_eval(const Mlp& net, const Matrix& batch);

// Mean of squared elementwise differences.
double l2_loss(const Matrix& prediction, const Matrix& target);
// d l2_loss / d prediction
Matrix l2_loss_grad(const Matrix& prediction, const Matrix& target);

struct LayerGrads {
    Matrix d_weights;
    std::vector<double> d_bias;
};

struct Gradients {
    std::vector<LayerGrads> layers;
    Matrix d_input;  // gradient wrt the forward batch
};

Gradients backward(const Mlp& net, const ForwardTape& tape, const Matrix& output_grad);

}  // namespace prosub
