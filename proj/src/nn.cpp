#include "dexkit/nn.hpp"

#include <algorithm>
#include <cmath>

#include "dexkit/rng.hpp"

namespace dexkit::nn {

namespace {
constexpr double kStdFloor = 1e-8;
}

std::string to_string(Activation a) { return a == Activation::tanh_fn ? "tanh" : "relu"; }

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::tanh_fn;
    if (s == "relu") return Activation::relu;
    throw ConfigError("unknown activation: " + s);
}

Normalizer Normalizer::identity(int dim) {
    Normalizer n;
    n.mean.assign(dim, 0.0);
    n.stddev.assign(dim, 1.0);
    return n;
}

Normalizer Normalizer::fit(const std::vector<Vec>& rows) {
    if (rows.empty()) throw ShapeError("Normalizer::fit: empty data");
    const size_t dim = rows.front().size();
    Normalizer n;
    n.mean.assign(dim, 0.0);
    n.stddev.assign(dim, 0.0);
    for (const Vec& r : rows) {
        if (r.size() != dim) throw ShapeError("Normalizer::fit: ragged rows");
        for (size_t i = 0; i < dim; ++i) n.mean[i] += r[i];
    }
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    for (size_t i = 0; i < dim; ++i) n.mean[i] *= inv_n;
    for (const Vec& r : rows)
        for (size_t i = 0; i < dim; ++i) {
            const double d = r[i] - n.mean[i];
            n.stddev[i] += d * d;
        }
    for (size_t i = 0; i < dim; ++i) n.stddev[i] = std::max(std::sqrt(n.stddev[i] * inv_n), kStdFloor);
    return n;
}

void Normalizer::normalize(std::span<const double> in, std::span<double> out) const {
    for (size_t i = 0; i < mean.size(); ++i) out[i] = (in[i] - mean[i]) / stddev[i];
}

void Normalizer::denormalize(std::span<const double> in, std::span<double> out) const {
    for (size_t i = 0; i < mean.size(); ++i) out[i] = in[i] * stddev[i] + mean[i];
}

size_t DenseNet::param_count() const {
    size_t n = 0;
    for (const Mat& w : weights) n += w.data.size();
    for (const Vec& b : biases) n += b.size();
    return n;
}

void DenseNet::validate() const {
    if (layer_sizes.size() < 2) throw ShapeError("DenseNet: need at least input and output layers");
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
        throw ShapeError("DenseNet: parameter count does not match layer_sizes");
    if (activations.size() != weights.size() - 1)
        throw ShapeError("DenseNet: need one activation per hidden layer");
    for (size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows != layer_sizes[l + 1] || weights[l].cols != layer_sizes[l])
            throw ShapeError("DenseNet: weight shape mismatch at layer " + std::to_string(l));
        if (static_cast<int>(biases[l].size()) != layer_sizes[l + 1])
            throw ShapeError("DenseNet: bias shape mismatch at layer " + std::to_string(l));
    }
    if (in_norm.dim() != input_dim() || out_norm.dim() != output_dim())
        throw ShapeError("DenseNet: normalizer dimensions mismatch");
    for (double s : in_norm.stddev)
        if (!(s > 0.0)) throw ShapeError("DenseNet: input normalizer stddev must be positive");
    for (double s : out_norm.stddev)
        if (!(s > 0.0)) throw ShapeError("DenseNet: output normalizer stddev must be positive");
}

DenseNet make_net(const std::vector<int>& layer_sizes, Activation hidden, uint64_t seed) {
    if (layer_sizes.size() < 2) throw ShapeError("make_net: need at least 2 layers");
    for (int s : layer_sizes)
        if (s <= 0) throw ShapeError("make_net: layer sizes must be positive");
    DenseNet net;
    net.layer_sizes = layer_sizes;
    Rng rng(seed);
    for (size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int in = layer_sizes[l];
        const int out = layer_sizes[l + 1];
        Mat w(out, in);
        const double scale = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& x : w.data) x = rng.uniform(-scale, scale);
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(out, 0.0);
        if (l + 2 < layer_sizes.size()) net.activations.push_back(hidden);
    }
    net.in_norm = Normalizer::identity(layer_sizes.front());
    net.out_norm = Normalizer::identity(layer_sizes.back());
    return net;
}

Grads make_grads(const DenseNet& net) {
    Grads g;
    for (const Mat& w : net.weights) g.weights.emplace_back(w.rows, w.cols);
    for (const Vec& b : net.biases) g.biases.emplace_back(b.size(), 0.0);
    return g;
}

void Grads::zero() {
    for (Mat& w : weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (Vec& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void Grads::scale(double s) {
    for (Mat& w : weights)
        for (double& x : w.data) x *= s;
    for (Vec& b : biases)
        for (double& x : b) x *= s;
}

void Grads::add_scaled(const Grads& other, double s) {
    for (size_t l = 0; l < weights.size(); ++l) {
        for (size_t i = 0; i < weights[l].data.size(); ++i) weights[l].data[i] += s * other.weights[l].data[i];
        for (size_t i = 0; i < biases[l].size(); ++i) biases[l][i] += s * other.biases[l][i];
    }
}

namespace {

inline double activate(Activation a, double x) {
    return a == Activation::tanh_fn ? std::tanh(x) : (x > 0.0 ? x : 0.0);
}

inline double activate_grad_from_pre(Activation a, double pre, double post) {
    return a == Activation::tanh_fn ? 1.0 - post * post : (pre > 0.0 ? 1.0 : 0.0);
}

}  // namespace

void net_forward_tape(const DenseNet& net, std::span<const double> input, Tape& tape, Vec& output) {
    const int layers = net.num_layers();
    if (static_cast<int>(input.size()) != net.input_dim())
        throw ShapeError("net_forward: input length " + std::to_string(input.size()) + " != " +
                         std::to_string(net.input_dim()));
    tape.input.resize(net.input_dim());
    net.in_norm.normalize(input, tape.input);
    tape.pre.resize(layers);
    tape.post.resize(layers);
    const Vec* prev = &tape.input;
    for (int l = 0; l < layers; ++l) {
        Vec& z = tape.pre[l];
        z.resize(net.layer_sizes[l + 1]);
        matvec(net.weights[l], *prev, z);
        for (size_t i = 0; i < z.size(); ++i) z[i] += net.biases[l][i];
        Vec& h = tape.post[l];
        h.resize(z.size());
        if (l + 1 < layers) {
            const Activation a = net.activations[l];
            for (size_t i = 0; i < z.size(); ++i) h[i] = activate(a, z[i]);
        } else {
            h = z;  // linear output layer
        }
        prev = &h;
    }
    output.resize(net.output_dim());
    net.out_norm.denormalize(tape.post.back(), output);
}

void net_forward(const DenseNet& net, std::span<const double> input, Vec& output) {
    thread_local Tape tape;
    net_forward_tape(net, input, tape, output);
}

Vec net_forward(const DenseNet& net, std::span<const double> input) {
    Vec out;
    net_forward(net, input, out);
    return out;
}

void net_backward(const DenseNet& net, const Tape& tape, std::span<const double> d_output,
                  Grads* grads, Vec* d_input) {
    const int layers = net.num_layers();
    if (static_cast<int>(d_output.size()) != net.output_dim())
        throw ShapeError("net_backward: gradient length mismatch");

    // chain through the output de-standardization
    Vec delta(net.output_dim());
    for (int i = 0; i < net.output_dim(); ++i) delta[i] = d_output[i] * net.out_norm.stddev[i];

    Vec prev_delta;
    for (int l = layers - 1; l >= 0; --l) {
        if (l + 1 < layers) {
            const Activation a = net.activations[l];
            for (size_t i = 0; i < delta.size(); ++i)
                delta[i] *= activate_grad_from_pre(a, tape.pre[l][i], tape.post[l][i]);
        }
        const Vec& layer_in = (l == 0) ? tape.input : tape.post[l - 1];
        if (grads != nullptr) {
            Mat& gw = grads->weights[l];
            Vec& gb = grads->biases[l];
            for (int r = 0; r < gw.rows; ++r) {
                double* row = gw.row(r);
                const double d = delta[r];
                for (int c = 0; c < gw.cols; ++c) row[c] += d * layer_in[c];
                gb[r] += d;
            }
        }
        if (l > 0 || d_input != nullptr) {
            prev_delta.assign(net.layer_sizes[l], 0.0);
            matvec_transposed(net.weights[l], delta, prev_delta);
            std::swap(delta, prev_delta);
        }
    }
    if (d_input != nullptr) {
        d_input->resize(net.input_dim());
        for (int i = 0; i < net.input_dim(); ++i) (*d_input)[i] = delta[i] / net.in_norm.stddev[i];
    }
}

namespace {

double batch_pass(const DenseNet& net, const std::vector<Vec>& inputs, const std::vector<Vec>& targets,
                  LossKind loss, Grads* grads) {
    if (inputs.empty()) throw ShapeError("net_gradients: empty batch");
    if (inputs.size() != targets.size()) throw ShapeError("net_gradients: inputs/targets size mismatch");
    Tape tape;
    Vec out;
    Vec d_out(net.output_dim());
    double total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i) {
        if (!all_finite(inputs[i]) || !all_finite(targets[i]))
            throw NumericError("net_gradients: non-finite input or target");
        if (grads != nullptr)
            net_forward_tape(net, inputs[i], tape, out);
        else
            net_forward(net, inputs[i], out);
        if (targets[i].size() != out.size()) throw ShapeError("net_gradients: target dimension mismatch");
        for (size_t k = 0; k < out.size(); ++k) {
            const double r = out[k] - targets[i][k];
            if (loss == LossKind::squared) {
                total += r * r;
                d_out[k] = 2.0 * r * inv_n;
            } else {
                total += std::fabs(r);
                d_out[k] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * inv_n;
            }
        }
        if (grads != nullptr) net_backward(net, tape, d_out, grads, nullptr);
    }
    return total * inv_n;
}

}  // namespace

double net_gradients(const DenseNet& net, const std::vector<Vec>& inputs,
                     const std::vector<Vec>& targets, LossKind loss, Grads& grads) {
    grads.zero();
    return batch_pass(net, inputs, targets, loss, &grads);
}

double net_loss(const DenseNet& net, const std::vector<Vec>& inputs,
                const std::vector<Vec>& targets, LossKind loss) {
    return batch_pass(net, inputs, targets, loss, nullptr);
}

AdamState make_adam(const DenseNet& net, double learning_rate) {
    AdamState st;
    st.learning_rate = learning_rate;
    st.first_moment = make_grads(net);
    st.second_moment = make_grads(net);
    return st;
}

void adam_step(AdamState& state, DenseNet& net, const Grads& grads) {
    if (grads.weights.size() != net.weights.size()) throw ShapeError("adam_step: gradient shape mismatch");
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    auto update = [&](double& p, double& m, double& v, double g) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g * g;
        p -= state.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + state.epsilon);
    };
    for (size_t l = 0; l < net.weights.size(); ++l) {
        Mat& w = net.weights[l];
        if (w.rows != grads.weights[l].rows || w.cols != grads.weights[l].cols)
            throw ShapeError("adam_step: weight shape mismatch at layer " + std::to_string(l));
        for (size_t i = 0; i < w.data.size(); ++i)
            update(w.data[i], state.first_moment.weights[l].data[i], state.second_moment.weights[l].data[i],
                   grads.weights[l].data[i]);
        for (size_t i = 0; i < net.biases[l].size(); ++i)
            update(net.biases[l][i], state.first_moment.biases[l][i], state.second_moment.biases[l][i],
                   grads.biases[l][i]);
    }
}

nlohmann::json net_to_json(const DenseNet& net) {
    nlohmann::json j;
    j["format_version"] = kNetFormatVersion;
    j["layer_sizes"] = net.layer_sizes;
    std::vector<std::string> acts;
    for (Activation a : net.activations) acts.push_back(to_string(a));
    j["activations"] = acts;
    nlohmann::json weights = nlohmann::json::array();
    for (const Mat& w : net.weights) weights.push_back(w.data);  // row-major
    j["weights"] = weights;
    nlohmann::json biases = nlohmann::json::array();
    for (const Vec& b : net.biases) biases.push_back(b);
    j["biases"] = biases;
    j["input_norm"] = {{"mean", net.in_norm.mean}, {"stddev", net.in_norm.stddev}};
    j["output_norm"] = {{"mean", net.out_norm.mean}, {"stddev", net.out_norm.stddev}};
    return j;
}

DenseNet net_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version")) throw CorruptFileError("network document: missing format_version");
    if (j.at("format_version").get<int>() != kNetFormatVersion)
        throw VersionMismatchError("network document: unsupported format_version " +
                                   j.at("format_version").dump());
    DenseNet net;
    net.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    for (const auto& a : j.at("activations")) net.activations.push_back(activation_from_string(a));
    for (size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        Mat w(net.layer_sizes[l + 1], net.layer_sizes[l]);
        w.data = j.at("weights").at(l).get<Vec>();
        if (w.data.size() != static_cast<size_t>(w.rows) * w.cols)
            throw CorruptFileError("network document: weight array size mismatch");
        net.weights.push_back(std::move(w));
        net.biases.push_back(j.at("biases").at(l).get<Vec>());
    }
    net.in_norm.mean = j.at("input_norm").at("mean").get<Vec>();
    net.in_norm.stddev = j.at("input_norm").at("stddev").get<Vec>();
    net.out_norm.mean = j.at("output_norm").at("mean").get<Vec>();
    net.out_norm.stddev = j.at("output_norm").at("stddev").get<Vec>();
    net.validate();
    return net;
}

bool nets_equal(const DenseNet& a, const DenseNet& b) {
    if (a.layer_sizes != b.layer_sizes || a.activations != b.activations) return false;
    for (size_t l = 0; l < a.weights.size(); ++l)
        if (a.weights[l].data != b.weights[l].data || a.biases[l] != b.biases[l]) return false;
    return a.in_norm.mean == b.in_norm.mean && a.in_norm.stddev == b.in_norm.stddev &&
           a.out_norm.mean == b.out_norm.mean && a.out_norm.stddev == b.out_norm.stddev;
}

}  // namespace dexkit::nn
