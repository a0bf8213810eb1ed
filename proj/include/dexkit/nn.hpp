#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexkit/linalg.hpp"

namespace dexkit::nn {

enum class Activation { tanh_fn, relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Per-dimension standardization statistics. Stddev entries are floored at
// 1e-8 so degenerate dimensions stay finite.
struct Normalizer {
    Vec mean;
    Vec stddev;

    static Normalizer identity(int dim);
    static Normalizer fit(const std::vector<Vec>& rows);

    int dim() const { return static_cast<int>(mean.size()); }
    void normalize(std::span<const double> in, std::span<double> out) const;
    void denormalize(std::span<const double> in, std::span<double> out) const;
};

// Fully connected network with a linear output layer. Weights are row-major
// (out x in). Inputs are standardized with in_norm before the first layer and
// outputs de-standardized with out_norm after the last one.
struct DenseNet {
    std::vector<int> layer_sizes;          // [input, hidden..., output]
    std::vector<Mat> weights;              // one per layer transition
    std::vector<Vec> biases;               // one per layer transition
    std::vector<Activation> activations;   // hidden layers only
    Normalizer in_norm;
    Normalizer out_norm;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int num_layers() const { return static_cast<int>(weights.size()); }
    size_t param_count() const;
    void validate() const;  // throws ShapeError on inconsistent dimensions
};

// Uniform init scaled by 1/sqrt(fan_in); identity normalizers.
DenseNet make_net(const std::vector<int>& layer_sizes, Activation hidden, uint64_t seed);

// Gradient accumulator shaped like the parameters of one DenseNet.
struct Grads {
    std::vector<Mat> weights;
    std::vector<Vec> biases;

    void zero();
    void scale(double s);
    void add_scaled(const Grads& other, double s);
};

Grads make_grads(const DenseNet& net);

// Stored intermediate values of one forward pass, reusable across calls.
struct Tape {
    Vec input;                 // standardized input
    std::vector<Vec> pre;      // pre-activations per layer
    std::vector<Vec> post;     // post-activations per layer (last = normalized output)
};

// Plain evaluation: standardize, run layers, de-standardize.
void net_forward(const DenseNet& net, std::span<const double> input, Vec& output);
Vec net_forward(const DenseNet& net, std::span<const double> input);

// Forward pass that records the tape needed by net_backward.
void net_forward_tape(const DenseNet& net, std::span<const double> input, Tape& tape, Vec& output);

// Backpropagate d_output (gradient of the loss w.r.t. the de-normalized
// output) through the pass recorded in `tape`. Accumulates parameter
// gradients into `grads` when non-null and writes the gradient w.r.t. the
// raw (un-normalized) input into `d_input` when non-null.
void net_backward(const DenseNet& net, const Tape& tape, std::span<const double> d_output,
                  Grads* grads, Vec* d_input);

enum class LossKind { squared, absolute };

// Mean-over-batch loss (per sample: sum over output dimensions) and its exact
// analytic gradient. For the absolute loss the subgradient at exact zeros
// is 0.
double net_gradients(const DenseNet& net, const std::vector<Vec>& inputs,
                     const std::vector<Vec>& targets, LossKind loss, Grads& grads);

// Loss only, same convention as net_gradients.
double net_loss(const DenseNet& net, const std::vector<Vec>& inputs,
                const std::vector<Vec>& targets, LossKind loss);

struct AdamState {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step = 0;
    Grads first_moment;
    Grads second_moment;
};

AdamState make_adam(const DenseNet& net, double learning_rate);

// Standard Adam update with bias correction; increments the step counter.
void adam_step(AdamState& state, DenseNet& net, const Grads& grads);

// Serialization (format_version checked on load).
inline constexpr int kNetFormatVersion = 1;
nlohmann::json net_to_json(const DenseNet& net);
DenseNet net_from_json(const nlohmann::json& j);

bool nets_equal(const DenseNet& a, const DenseNet& b);  // bit-identical parameters

}  // namespace dexkit::nn
