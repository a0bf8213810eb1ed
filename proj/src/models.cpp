#include "dexkit/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dexkit {

namespace {

void concat(std::span<const double> a, std::span<const double> b, Vec& out) {
    out.resize(a.size() + b.size());
    std::copy(a.begin(), a.end(), out.begin());
    std::copy(b.begin(), b.end(), out.begin() + static_cast<long>(a.size()));
}

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes;
    sizes.push_back(in);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(out);
    return sizes;
}

}  // namespace

void ForwardModel::predict(std::span<const double> state, std::span<const double> action,
                           Vec& out) const {
    thread_local Vec input;
    concat(state, action, input);
    nn::net_forward(net, input, out);
    for (size_t i = 0; i < out.size(); ++i) out[i] += state[i];
}

Vec ForwardModel::predict(std::span<const double> state, std::span<const double> action) const {
    Vec out;
    predict(state, action, out);
    return out;
}

Vec InverseModel::predict_action(std::span<const double> state, std::span<const double> target) const {
    thread_local Vec input;
    concat(state, target, input);
    return nn::net_forward(net, input);
}

Vec GaussianAction::sample(Rng& rng) const {
    Vec a(mean.size());
    for (size_t i = 0; i < mean.size(); ++i)
        a[i] = clamp(mean[i] + stddev[i] * rng.normal(), -1.0, 1.0);
    return a;
}

std::vector<size_t> valid_window_starts(const Dataset& ds, int horizon) {
    if (horizon < 1) throw ConfigError("forward training: horizon must be >= 1");
    std::vector<size_t> starts;
    for (const auto& [begin, end] : ds.episode_ranges())
        for (size_t i = begin; i + static_cast<size_t>(horizon) <= end; ++i) starts.push_back(i);
    if (starts.empty())
        throw ConfigError("forward training: no episode provides " + std::to_string(horizon) +
                          " consecutive transitions");
    return starts;
}

std::vector<size_t> valid_inverse_pairs(const Dataset& ds, int target_shift) {
    if (target_shift < 1) throw ConfigError("inverse training: target_shift must be >= 1");
    std::vector<size_t> idx;
    for (const auto& [begin, end] : ds.episode_ranges())
        for (size_t i = begin; i + static_cast<size_t>(target_shift) <= end; ++i) idx.push_back(i);
    if (idx.empty())
        throw ConfigError("inverse training: every episode is shorter than target_shift");
    return idx;
}

std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, double fraction) {
    Dataset train = ds, eval = ds;
    train.transitions.clear();
    eval.transitions.clear();
    const auto ranges = ds.episode_ranges();
    size_t eval_episodes = 0;
    if (ranges.size() >= 2 && fraction > 0.0)
        eval_episodes = std::max<size_t>(1, static_cast<size_t>(std::floor(fraction * ranges.size())));
    const size_t split = ranges.size() - eval_episodes;
    for (size_t e = 0; e < ranges.size(); ++e) {
        auto& dst = e < split ? train : eval;
        for (size_t i = ranges[e].first; i < ranges[e].second; ++i)
            dst.transitions.push_back(ds.transitions[i]);
    }
    return {std::move(train), std::move(eval)};
}

double forward_multistep_loss(const ForwardModel& model, const Dataset& ds,
                              std::span<const size_t> window_starts) {
    const int s_dim = model.state_dim;
    Vec shat, pred;
    double total = 0.0;
    for (size_t w : window_starts) {
        shat = ds.transitions[w].state;
        double weight = 1.0;
        for (int i = 0; i < model.horizon; ++i) {
            const Transition& tr = ds.transitions[w + static_cast<size_t>(i)];
            model.predict(shat, tr.action, pred);
            double err = 0.0;
            for (int d = 0; d < s_dim; ++d) {
                const double r = pred[d] - tr.next_state[d];
                err += r * r;
            }
            total += weight * err;
            weight *= model.discount;
            shat = pred;
        }
    }
    return total / static_cast<double>(window_starts.size());
}

namespace {

// Gradient of the multi-step window loss, backpropagated through the model's
// own rollout (the chained shat path), accumulated into `grads` with weight
// `scale`. Returns the window loss.
double window_backprop(const ForwardModel& model, const Dataset& ds, size_t w, double scale,
                       std::vector<nn::Tape>& tapes, nn::Grads& grads) {
    const int s_dim = model.state_dim;
    const int horizon = model.horizon;
    thread_local Vec input, delta_out, g, din;
    thread_local std::vector<Vec> residuals, states;
    residuals.assign(horizon, Vec(s_dim));
    states.assign(horizon + 1, Vec());
    states[0] = ds.transitions[w].state;

    double loss = 0.0;
    double weight = 1.0;
    for (int i = 0; i < horizon; ++i) {
        const Transition& tr = ds.transitions[w + static_cast<size_t>(i)];
        concat(states[i], tr.action, input);
        nn::net_forward_tape(model.net, input, tapes[i], delta_out);
        states[i + 1].resize(s_dim);
        for (int d = 0; d < s_dim; ++d) {
            states[i + 1][d] = states[i][d] + delta_out[d];
            residuals[i][d] = states[i + 1][d] - tr.next_state[d];
            loss += weight * residuals[i][d] * residuals[i][d];
        }
        if (!all_finite(states[i + 1])) throw NumericError("forward training: prediction diverged");
        weight *= model.discount;
    }

    g.assign(s_dim, 0.0);
    for (int i = horizon - 1; i >= 0; --i) {
        const double wi = std::pow(model.discount, i) * scale;
        for (int d = 0; d < s_dim; ++d) g[d] += 2.0 * wi * residuals[i][d];
        nn::net_backward(model.net, tapes[i], g, &grads, &din);
        // shat_{i+1} = shat_i + f(shat_i, a_i): carry g along the identity path
        for (int d = 0; d < s_dim; ++d) g[d] += din[d];
    }
    return loss;
}

}  // namespace

ForwardModel train_forward(const Dataset& ds, const ForwardHyper& hyper, TrainReport* report) {
    if (ds.empty()) throw ConfigError("train_forward: empty dataset");
    if (!(hyper.discount > 0.0 && hyper.discount <= 1.0))
        throw ConfigError("train_forward: discount must lie in (0,1]");
    auto [train, eval] = split_holdout(ds, hyper.holdout_fraction);
    const auto starts = valid_window_starts(train, hyper.horizon);

    const int h = ds.state_dim;
    const int k = ds.action_dim;
    ForwardModel model;
    model.state_dim = h;
    model.action_dim = k;
    model.horizon = hyper.horizon;
    model.discount = hyper.discount;
    model.net = nn::make_net(layer_sizes(h + k, hyper.hidden, h), hyper.activation, hyper.seed);

    {
        std::vector<Vec> in_rows, out_rows;
        in_rows.reserve(train.size());
        out_rows.reserve(train.size());
        Vec row;
        for (const Transition& t : train.transitions) {
            concat(t.state, t.action, row);
            in_rows.push_back(row);
            Vec delta(h);
            for (int d = 0; d < h; ++d) delta[d] = t.next_state[d] - t.state[d];
            out_rows.push_back(std::move(delta));
        }
        model.net.in_norm = nn::Normalizer::fit(in_rows);
        model.net.out_norm = nn::Normalizer::fit(out_rows);
    }

    nn::AdamState adam = nn::make_adam(model.net, hyper.learning_rate);
    nn::Grads grads = nn::make_grads(model.net);
    std::vector<nn::Tape> tapes(hyper.horizon);
    Rng rng(hyper.seed, 1);
    if (report != nullptr) report->loss_curve.clear();

    for (int step = 0; step < hyper.steps; ++step) {
        grads.zero();
        const int batch = std::min<int>(hyper.batch, static_cast<int>(starts.size()));
        const double inv_batch = 1.0 / static_cast<double>(batch);
        double loss = 0.0;
        for (int b = 0; b < batch; ++b) {
            const size_t w = starts[static_cast<size_t>(rng.uniform_int(static_cast<int>(starts.size())))];
            loss += window_backprop(model, train, w, inv_batch, tapes, grads);
        }
        loss *= inv_batch;
        if (hyper.final_learning_rate_fraction < 1.0) {
            const double t = hyper.steps > 1 ? static_cast<double>(step) / (hyper.steps - 1) : 0.0;
            adam.learning_rate =
                hyper.learning_rate * (1.0 + t * (hyper.final_learning_rate_fraction - 1.0));
        }
        nn::adam_step(adam, model.net, grads);
        if (report != nullptr) {
            report->loss_curve.push_back(loss);
            report->final_loss = loss;
        }
    }
    if (report != nullptr)
        report->holdout_mse = eval.empty() ? std::numeric_limits<double>::quiet_NaN() : evaluate_mse(model, eval);
    return model;
}

std::vector<Vec> rollout(const ForwardModel& model, const Vec& s0, const std::vector<Vec>& actions) {
    if (static_cast<int>(s0.size()) != model.state_dim) throw ShapeError("rollout: bad initial state");
    std::vector<Vec> traj;
    traj.reserve(actions.size() + 1);
    traj.push_back(s0);
    for (const Vec& a : actions) {
        traj.push_back(model.predict(traj.back(), a));
        if (!all_finite(traj.back())) throw NumericError("rollout: prediction diverged");
    }
    return traj;
}

InverseModel train_inverse(const Dataset& ds, const InverseHyper& hyper, TrainReport* report) {
    if (ds.empty()) throw ConfigError("train_inverse: empty dataset");
    auto [train, eval] = split_holdout(ds, hyper.holdout_fraction);
    const auto pairs = valid_inverse_pairs(train, hyper.target_shift);

    const int h = ds.state_dim;
    const int k = ds.action_dim;
    InverseModel model;
    model.state_dim = h;
    model.action_dim = k;
    model.target_shift = hyper.target_shift;
    model.net = nn::make_net(layer_sizes(2 * h, hyper.hidden, k), hyper.activation, hyper.seed);

    auto pair_input = [&](const Dataset& d, size_t i, Vec& out) {
        const Transition& from = d.transitions[i];
        const Transition& to = d.transitions[i + static_cast<size_t>(hyper.target_shift) - 1];
        concat(from.state, to.next_state, out);
    };

    {
        std::vector<Vec> in_rows, out_rows;
        Vec row;
        for (size_t i : pairs) {
            pair_input(train, i, row);
            in_rows.push_back(row);
            out_rows.push_back(train.transitions[i].action);
        }
        model.net.in_norm = nn::Normalizer::fit(in_rows);
        model.net.out_norm = nn::Normalizer::fit(out_rows);
    }

    nn::AdamState adam = nn::make_adam(model.net, hyper.learning_rate);
    nn::Grads grads = nn::make_grads(model.net);
    Rng rng(hyper.seed, 1);
    std::vector<Vec> batch_in, batch_target;
    if (report != nullptr) report->loss_curve.clear();
    for (int step = 0; step < hyper.steps; ++step) {
        const int batch = std::min<int>(hyper.batch, static_cast<int>(pairs.size()));
        batch_in.assign(batch, Vec());
        batch_target.assign(batch, Vec());
        for (int b = 0; b < batch; ++b) {
            const size_t i = pairs[static_cast<size_t>(rng.uniform_int(static_cast<int>(pairs.size())))];
            pair_input(train, i, batch_in[b]);
            batch_target[b] = train.transitions[i].action;
        }
        const double loss = nn::net_gradients(model.net, batch_in, batch_target, nn::LossKind::absolute, grads);
        nn::adam_step(adam, model.net, grads);
        if (report != nullptr) {
            report->loss_curve.push_back(loss);
            report->final_loss = loss;
        }
    }

    if (report != nullptr) {
        // held-out mean absolute error per action dimension
        report->holdout_mse = std::numeric_limits<double>::quiet_NaN();
        if (!eval.empty()) {
            std::vector<size_t> eval_pairs;
            try {
                eval_pairs = valid_inverse_pairs(eval, hyper.target_shift);
            } catch (const ConfigError&) {
            }
            if (!eval_pairs.empty()) {
                double total = 0.0;
                Vec in;
                for (size_t i : eval_pairs) {
                    pair_input(eval, i, in);
                    const Vec pred = nn::net_forward(model.net, in);
                    for (int d = 0; d < k; ++d) total += std::fabs(pred[d] - eval.transitions[i].action[d]);
                }
                report->holdout_mse = total / (static_cast<double>(eval_pairs.size()) * k);
            }
        }
    }
    return model;
}

Vec estimate_sigma(InverseModel& model, const Dataset& ds) {
    if (ds.empty()) throw ConfigError("estimate_sigma: empty dataset");
    const auto pairs = valid_inverse_pairs(ds, model.target_shift);
    Vec sigma(model.action_dim, 0.0);
    Vec input;
    for (size_t i : pairs) {
        const Transition& from = ds.transitions[i];
        const Transition& to = ds.transitions[i + static_cast<size_t>(model.target_shift) - 1];
        concat(from.state, to.next_state, input);
        const Vec pred = nn::net_forward(model.net, input);
        for (int d = 0; d < model.action_dim; ++d) sigma[d] += std::fabs(from.action[d] - pred[d]);
    }
    for (double& s : sigma) s /= static_cast<double>(pairs.size());
    model.sigma = sigma;
    return sigma;
}

GaussianAction inverse_distribution(const InverseModel& model, std::span<const double> state,
                                    std::span<const double> target) {
    if (!model.has_sigma())
        throw StateError("inverse_distribution: sigma has not been estimated for this model");
    GaussianAction dist;
    dist.mean = model.predict_action(state, target);
    dist.stddev = model.sigma;
    return dist;
}

TrainReport finetune(ForwardModel& model, const Dataset& new_data, int steps, double learning_rate,
                     uint64_t seed, const Dataset* eval_data, Vec* eval_curve, int eval_every) {
    TrainReport report;
    if (eval_curve != nullptr) eval_curve->clear();
    auto record_eval = [&]() {
        if (eval_curve != nullptr && eval_data != nullptr) eval_curve->push_back(evaluate_mse(model, *eval_data));
    };
    record_eval();
    if (steps <= 0) {
        if (eval_data != nullptr) report.holdout_mse = evaluate_mse(model, *eval_data);
        return report;
    }
    const auto starts = valid_window_starts(new_data, model.horizon);
    nn::AdamState adam = nn::make_adam(model.net, learning_rate);
    nn::Grads grads = nn::make_grads(model.net);
    std::vector<nn::Tape> tapes(model.horizon);
    Rng rng(seed, 2);
    for (int step = 0; step < steps; ++step) {
        grads.zero();
        const int batch = std::min<int>(256, static_cast<int>(starts.size()));
        const double inv_batch = 1.0 / static_cast<double>(batch);
        double loss = 0.0;
        for (int b = 0; b < batch; ++b) {
            const size_t w = starts[static_cast<size_t>(rng.uniform_int(static_cast<int>(starts.size())))];
            loss += window_backprop(model, new_data, w, inv_batch, tapes, grads);
        }
        nn::adam_step(adam, model.net, grads);
        report.loss_curve.push_back(loss * inv_batch);
        report.final_loss = loss * inv_batch;
        if ((step + 1) % eval_every == 0) record_eval();
    }
    if (eval_data != nullptr) report.holdout_mse = evaluate_mse(model, *eval_data);
    return report;
}

double evaluate_mse(const ForwardModel& model, const Dataset& ds) {
    if (ds.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    Vec pred;
    for (const Transition& t : ds.transitions) {
        model.predict(t.state, t.action, pred);
        for (int d = 0; d < model.state_dim; ++d) {
            const double r = pred[d] - t.next_state[d];
            total += r * r;
        }
    }
    return total / (static_cast<double>(ds.size()) * model.state_dim);
}

nlohmann::json forward_to_json(const ForwardModel& m) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = "forward";
    j["state_dim"] = m.state_dim;
    j["action_dim"] = m.action_dim;
    j["horizon"] = m.horizon;
    j["discount"] = m.discount;
    j["net"] = nn::net_to_json(m.net);
    return j;
}

namespace {

void check_model_doc(const nlohmann::json& j, const char* kind) {
    if (!j.contains("format_version") || !j.contains("kind"))
        throw CorruptFileError("model document: missing format_version or kind");
    if (j.at("format_version").get<int>() != kModelFormatVersion)
        throw VersionMismatchError("model document: unsupported format_version " +
                                   j.at("format_version").dump());
    if (j.at("kind").get<std::string>() != kind)
        throw CorruptFileError("model document: expected kind '" + std::string(kind) + "', found '" +
                               j.at("kind").get<std::string>() + "'");
}

}  // namespace

ForwardModel forward_from_json(const nlohmann::json& j) {
    check_model_doc(j, "forward");
    ForwardModel m;
    m.state_dim = j.at("state_dim").get<int>();
    m.action_dim = j.at("action_dim").get<int>();
    m.horizon = j.at("horizon").get<int>();
    m.discount = j.at("discount").get<double>();
    m.net = nn::net_from_json(j.at("net"));
    if (m.net.input_dim() != m.state_dim + m.action_dim || m.net.output_dim() != m.state_dim)
        throw CorruptFileError("forward model document: network dimensions inconsistent");
    return m;
}

nlohmann::json inverse_to_json(const InverseModel& m) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = "inverse";
    j["state_dim"] = m.state_dim;
    j["action_dim"] = m.action_dim;
    j["target_shift"] = m.target_shift;
    j["sigma"] = m.sigma;
    j["net"] = nn::net_to_json(m.net);
    return j;
}

InverseModel inverse_from_json(const nlohmann::json& j) {
    check_model_doc(j, "inverse");
    InverseModel m;
    m.state_dim = j.at("state_dim").get<int>();
    m.action_dim = j.at("action_dim").get<int>();
    m.target_shift = j.at("target_shift").get<int>();
    m.sigma = j.at("sigma").get<Vec>();
    m.net = nn::net_from_json(j.at("net"));
    if (m.net.input_dim() != 2 * m.state_dim || m.net.output_dim() != m.action_dim)
        throw CorruptFileError("inverse model document: network dimensions inconsistent");
    return m;
}

}  // namespace dexkit
