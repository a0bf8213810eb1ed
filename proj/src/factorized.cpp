#include "dexkit/factorized.hpp"

#include <algorithm>
#include <cmath>

namespace dexkit {

Vec encode_object(const ObjectState& obj) {
    return {std::cos(obj.z_rotation), std::sin(obj.z_rotation), obj.x, obj.y,
            obj.dropped ? 1.0 : 0.0};
}

ObjectState decode_object(std::span<const double> f) {
    if (f.size() != kObjectFeatureDim) throw ShapeError("decode_object: expected 5 features");
    ObjectState obj;
    obj.z_rotation = std::atan2(f[1], f[0]);
    obj.x = f[2];
    obj.y = f[3];
    obj.dropped = f[4] > 0.5;
    return obj;
}

void ExternalModel::predict(std::span<const double> hand_pred, std::span<const double> object_features,
                            Vec& out) const {
    thread_local Vec input;
    input.resize(hand_pred.size() + object_features.size());
    std::copy(hand_pred.begin(), hand_pred.end(), input.begin());
    std::copy(object_features.begin(), object_features.end(),
              input.begin() + static_cast<long>(hand_pred.size()));
    nn::net_forward(net, input, out);
}

ExternalModel make_external_model(int state_dim, const std::vector<int>& hidden,
                                  nn::Activation activation, uint64_t seed) {
    ExternalModel m;
    m.state_dim = state_dim;
    std::vector<int> sizes;
    sizes.push_back(state_dim + kObjectFeatureDim);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(state_dim + kObjectFeatureDim);
    m.net = nn::make_net(sizes, activation, seed);
    return m;
}

void factorized_predict(const ForwardModel& internal, const ExternalModel& external,
                        std::span<const double> state, std::span<const double> object_features,
                        std::span<const double> action, Vec& state_next, Vec& object_next) {
    thread_local Vec shat, combined;
    internal.predict(state, action, shat);
    external.predict(shat, object_features, combined);
    state_next.assign(combined.begin(), combined.begin() + internal.state_dim);
    object_next.assign(combined.begin() + internal.state_dim, combined.end());
}

void MonolithicModel::predict(std::span<const double> composite, std::span<const double> action,
                              Vec& out) const {
    thread_local Vec input;
    input.resize(composite.size() + action.size());
    std::copy(composite.begin(), composite.end(), input.begin());
    std::copy(action.begin(), action.end(), input.begin() + static_cast<long>(composite.size()));
    nn::net_forward(net, input, out);
}

MonolithicModel make_monolithic_model(int state_dim, int action_dim, const std::vector<int>& hidden,
                                      nn::Activation activation, uint64_t seed) {
    MonolithicModel m;
    m.state_dim = state_dim;
    m.action_dim = action_dim;
    std::vector<int> sizes;
    sizes.push_back(state_dim + kObjectFeatureDim + action_dim);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(state_dim + kObjectFeatureDim);
    m.net = nn::make_net(sizes, activation, seed);
    return m;
}

Dynamics factorized_dynamics(const ForwardModel& internal, const ExternalModel& external) {
    Dynamics d;
    d.state_dim = internal.state_dim + kObjectFeatureDim;
    d.action_dim = internal.action_dim;
    const int h = internal.state_dim;
    d.step = [&internal, &external, h](std::span<const double> z, std::span<const double> a, Vec& out) {
        thread_local Vec shat;
        internal.predict(z.subspan(0, static_cast<size_t>(h)), a, shat);
        external.predict(shat, z.subspan(static_cast<size_t>(h)), out);
    };
    return d;
}

Dynamics monolithic_dynamics(const MonolithicModel& model) {
    Dynamics d;
    d.state_dim = model.state_dim + kObjectFeatureDim;
    d.action_dim = model.action_dim;
    d.step = [&model](std::span<const double> z, std::span<const double> a, Vec& out) {
        model.predict(z, a, out);
    };
    return d;
}

bool ReorientTask::complete(const ObjectState& obj) const {
    if (obj.dropped) return false;
    const double dx = obj.x - goal_x;
    const double dy = obj.y - goal_y;
    return std::cos(obj.z_rotation - goal_rotation) > cos_threshold &&
           std::sqrt(dx * dx + dy * dy) < pos_threshold;
}

double reorient_reward(const ObjectState& obj, const ReorientTask& task) {
    const double dx = obj.x - task.goal_x;
    const double dy = obj.y - task.goal_y;
    return -task.weight_position * std::sqrt(dx * dx + dy * dy) +
           task.weight_rotation * std::cos(obj.z_rotation - task.goal_rotation) -
           task.weight_drop * (obj.dropped ? 1.0 : 0.0);
}

TrajectoryCost make_reorient_cost(const ReorientTask& task, int state_dim) {
    TrajectoryCost cost;
    cost.value = [task, state_dim](const std::vector<Vec>& states) {
        double total = 0.0;
        for (size_t t = 1; t < states.size(); ++t) {
            const std::span<const double> features(states[t].data() + state_dim, kObjectFeatureDim);
            total -= reorient_reward(decode_object(features), task);
        }
        return total;
    };
    return cost;
}

namespace {

void compose_state(std::span<const double> tips, const ObjectState& obj, Vec& out) {
    out.resize(tips.size() + kObjectFeatureDim);
    std::copy(tips.begin(), tips.end(), out.begin());
    const Vec feat = encode_object(obj);
    std::copy(feat.begin(), feat.end(), out.begin() + static_cast<long>(tips.size()));
}

struct SampledEpisode {
    ReorientTask task;
    double start_rotation = 0.0;
};

SampledEpisode sample_episode(const InHandEnv& env, const AdaptSchedule& sched, Rng& rng) {
    SampledEpisode out;
    out.start_rotation = sched.start_rotation_range > 0.0
                             ? rng.uniform(-sched.start_rotation_range, sched.start_rotation_range)
                             : 0.0;
    const double magnitude = rng.uniform(sched.goal_low, sched.goal_high);
    out.task.goal_rotation = out.start_rotation + (rng.uniform01() < 0.5 ? magnitude : -magnitude);
    out.task.goal_x = env.params.center.x;
    out.task.goal_y = env.params.center.y;
    out.task.object_size =
        sched.object_sizes[static_cast<size_t>(rng.uniform_int(static_cast<int>(sched.object_sizes.size())))];
    return out;
}

// Multi-step loss/gradient over one composite window for the factorized
// model. Gradients flow through both networks' inputs; internal parameter
// gradients are accumulated only when grads_int is non-null (end2end).
double factorized_window(const ForwardModel& internal, const ExternalModel& external,
                         const Dataset& buffer, size_t w, int horizon, double discount, double scale,
                         std::vector<nn::Tape>& tapes_int, std::vector<nn::Tape>& tapes_ext,
                         nn::Grads* grads_ext, nn::Grads* grads_int) {
    const int h = internal.state_dim;
    const int z_dim = h + kObjectFeatureDim;
    thread_local Vec input, delta, shat, y, g, du, din;
    thread_local std::vector<Vec> residuals, zs;
    residuals.assign(horizon, Vec(z_dim));
    zs.assign(horizon + 1, Vec());
    zs[0] = buffer.transitions[w].state;

    double loss = 0.0;
    double weight = 1.0;
    for (int i = 0; i < horizon; ++i) {
        const Transition& tr = buffer.transitions[w + static_cast<size_t>(i)];
        input.resize(static_cast<size_t>(h) + tr.action.size());
        std::copy(zs[i].begin(), zs[i].begin() + h, input.begin());
        std::copy(tr.action.begin(), tr.action.end(), input.begin() + h);
        nn::net_forward_tape(internal.net, input, tapes_int[i], delta);
        shat.resize(h + kObjectFeatureDim);
        for (int d = 0; d < h; ++d) shat[d] = zs[i][d] + delta[d];
        std::copy(zs[i].begin() + h, zs[i].end(), shat.begin() + h);
        nn::net_forward_tape(external.net, shat, tapes_ext[i], y);
        zs[i + 1] = y;
        for (int d = 0; d < z_dim; ++d) {
            residuals[i][d] = y[d] - tr.next_state[d];
            loss += weight * residuals[i][d] * residuals[i][d];
        }
        if (!all_finite(y)) throw NumericError("factorized training: prediction diverged");
        weight *= discount;
    }
    if (grads_ext == nullptr) return loss;

    g.assign(z_dim, 0.0);
    for (int i = horizon - 1; i >= 0; --i) {
        const double wi = std::pow(discount, i) * scale;
        for (int d = 0; d < z_dim; ++d) g[d] += 2.0 * wi * residuals[i][d];
        nn::net_backward(external.net, tapes_ext[i], g, grads_ext, &du);
        // du[0:h] is d/d shat; push it through the internal prediction
        const std::span<const double> d_shat(du.data(), static_cast<size_t>(h));
        nn::net_backward(internal.net, tapes_int[i], d_shat, grads_int, &din);
        for (int d = 0; d < h; ++d) g[d] = du[d] + din[d];  // identity + network path
        for (int d = 0; d < kObjectFeatureDim; ++d) g[h + d] = du[h + d];
    }
    return loss;
}

double monolithic_window(const MonolithicModel& model, const Dataset& buffer, size_t w, int horizon,
                         double discount, double scale, std::vector<nn::Tape>& tapes,
                         nn::Grads* grads) {
    const int z_dim = model.state_dim + kObjectFeatureDim;
    thread_local Vec input, y, g, din;
    thread_local std::vector<Vec> residuals, zs;
    residuals.assign(horizon, Vec(z_dim));
    zs.assign(horizon + 1, Vec());
    zs[0] = buffer.transitions[w].state;

    double loss = 0.0;
    double weight = 1.0;
    for (int i = 0; i < horizon; ++i) {
        const Transition& tr = buffer.transitions[w + static_cast<size_t>(i)];
        input.resize(static_cast<size_t>(z_dim) + tr.action.size());
        std::copy(zs[i].begin(), zs[i].end(), input.begin());
        std::copy(tr.action.begin(), tr.action.end(), input.begin() + z_dim);
        nn::net_forward_tape(model.net, input, tapes[i], y);
        zs[i + 1] = y;
        for (int d = 0; d < z_dim; ++d) {
            residuals[i][d] = y[d] - tr.next_state[d];
            loss += weight * residuals[i][d] * residuals[i][d];
        }
        if (!all_finite(y)) throw NumericError("monolithic training: prediction diverged");
        weight *= discount;
    }
    if (grads == nullptr) return loss;

    g.assign(z_dim, 0.0);
    for (int i = horizon - 1; i >= 0; --i) {
        const double wi = std::pow(discount, i) * scale;
        for (int d = 0; d < z_dim; ++d) g[d] += 2.0 * wi * residuals[i][d];
        nn::net_backward(model.net, tapes[i], g, grads, &din);
        std::copy(din.begin(), din.begin() + z_dim, g.begin());
    }
    return loss;
}

// Largest horizon (<= requested) for which the buffer has windows.
int usable_horizon(const Dataset& buffer, int requested) {
    for (int s = requested; s >= 1; --s) {
        bool any = false;
        for (const auto& [begin, end] : buffer.episode_ranges())
            if (end - begin >= static_cast<size_t>(s)) {
                any = true;
                break;
            }
        if (any) return s;
    }
    return 0;
}

void fit_external_normalizers(ExternalModel& external, const Dataset& buffer) {
    const int h = external.state_dim;
    std::vector<Vec> in_rows, out_rows;
    in_rows.reserve(buffer.size());
    out_rows.reserve(buffer.size());
    for (const Transition& t : buffer.transitions) {
        // proxy for (shat, x): the realized next hand state with the current object
        Vec in(t.state.size());
        std::copy(t.next_state.begin(), t.next_state.begin() + h, in.begin());
        std::copy(t.state.begin() + h, t.state.end(), in.begin() + h);
        in_rows.push_back(std::move(in));
        out_rows.push_back(t.next_state);
    }
    external.net.in_norm = nn::Normalizer::fit(in_rows);
    external.net.out_norm = nn::Normalizer::fit(out_rows);
}

void fit_monolithic_normalizers(MonolithicModel& model, const Dataset& buffer) {
    std::vector<Vec> in_rows, out_rows;
    in_rows.reserve(buffer.size());
    out_rows.reserve(buffer.size());
    for (const Transition& t : buffer.transitions) {
        Vec in(t.state.size() + t.action.size());
        std::copy(t.state.begin(), t.state.end(), in.begin());
        std::copy(t.action.begin(), t.action.end(), in.begin() + static_cast<long>(t.state.size()));
        in_rows.push_back(std::move(in));
        out_rows.push_back(t.next_state);
    }
    model.net.in_norm = nn::Normalizer::fit(in_rows);
    model.net.out_norm = nn::Normalizer::fit(out_rows);
}

struct RolloutOutcome {
    bool success = false;
    double reward_sum = 0.0;
    long reward_count = 0;
    long steps = 0;
};

// One manipulation episode: plan (or act randomly during warmup), execute,
// append composite transitions to the buffer.
template <typename PlanFn>
RolloutOutcome run_episode(InHandEnv env, const SampledEpisode& episode, const AdaptSchedule& sched,
                           bool warmup, Rng& rng, PlanFn&& plan_action, Dataset& buffer,
                           int episode_id) {
    const ReorientTask& task = episode.task;
    RolloutOutcome outcome;
    if (sched.start_pose_jitter > 0.0) {
        Vec q = env.hand_state.joint_angles;
        for (size_t i = 0; i < q.size(); ++i)
            q[i] = clamp(q[i] + rng.uniform(-sched.start_pose_jitter, sched.start_pose_jitter),
                         env.hand.joint_lo[i], env.hand.joint_hi[i]);
        env.hand_state = make_state(env.hand, std::move(q));
    }
    env.object.z_rotation = episode.start_rotation;
    env.params.size = task.object_size;
    const int k = env.hand.action_dim();
    Vec z, z_next, action(k);
    for (int step = 0; step < sched.episode_steps; ++step) {
        if (task.complete(env.object)) {
            outcome.success = true;
            return outcome;
        }
        compose_state(env.hand_state.tips, env.object, z);
        if (warmup) {
            for (int i = 0; i < k; ++i) action[i] = rng.uniform(-1.0, 1.0);
        } else {
            action = plan_action(z, rng.next());
        }
        env.step(action);
        compose_state(env.hand_state.tips, env.object, z_next);
        Transition tr;
        tr.episode = episode_id;
        tr.step = step;
        tr.state = z;
        tr.action = action;
        tr.next_state = z_next;
        buffer.transitions.push_back(std::move(tr));
        outcome.steps += 1;
        outcome.reward_sum += reorient_reward(env.object, task);
        outcome.reward_count += 1;
    }
    outcome.success = task.complete(env.object);
    return outcome;
}

}  // namespace

double factorized_multistep_loss(const ForwardModel& internal, const ExternalModel& external,
                                 const Dataset& buffer, std::span<const size_t> window_starts,
                                 int horizon, double discount) {
    std::vector<nn::Tape> tapes_int(horizon), tapes_ext(horizon);
    double total = 0.0;
    for (size_t w : window_starts)
        total += factorized_window(internal, external, buffer, w, horizon, discount, 1.0, tapes_int,
                                   tapes_ext, nullptr, nullptr);
    return total / static_cast<double>(window_starts.size());
}

double monolithic_multistep_loss(const MonolithicModel& model, const Dataset& buffer,
                                 std::span<const size_t> window_starts, int horizon, double discount) {
    std::vector<nn::Tape> tapes(horizon);
    double total = 0.0;
    for (size_t w : window_starts)
        total += monolithic_window(model, buffer, w, horizon, discount, 1.0, tapes, nullptr);
    return total / static_cast<double>(window_starts.size());
}

long env_steps_to_reach(const std::vector<CurvePoint>& curve, double level, long fallback) {
    for (const CurvePoint& p : curve)
        if (p.success_rate >= level) return p.env_steps;
    return fallback;
}

nlohmann::json external_to_json(const ExternalModel& m) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = "external";
    j["state_dim"] = m.state_dim;
    j["object_dim"] = m.object_dim;
    j["horizon"] = m.horizon;
    j["discount"] = m.discount;
    j["net"] = nn::net_to_json(m.net);
    return j;
}

ExternalModel external_from_json(const nlohmann::json& j) {
    if (!j.contains("kind") || j.at("kind").get<std::string>() != "external")
        throw CorruptFileError("model document: expected kind 'external'");
    if (j.at("format_version").get<int>() != kModelFormatVersion)
        throw VersionMismatchError("model document: unsupported format_version");
    ExternalModel m;
    m.state_dim = j.at("state_dim").get<int>();
    m.object_dim = j.at("object_dim").get<int>();
    m.horizon = j.at("horizon").get<int>();
    m.discount = j.at("discount").get<double>();
    m.net = nn::net_from_json(j.at("net"));
    if (m.net.input_dim() != m.state_dim + m.object_dim)
        throw CorruptFileError("external model document: network dimensions inconsistent");
    return m;
}

nlohmann::json monolithic_to_json(const MonolithicModel& m) {
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["kind"] = "monolithic";
    j["state_dim"] = m.state_dim;
    j["object_dim"] = m.object_dim;
    j["action_dim"] = m.action_dim;
    j["horizon"] = m.horizon;
    j["discount"] = m.discount;
    j["multi_step_loss"] = m.multi_step_loss;
    j["net"] = nn::net_to_json(m.net);
    return j;
}

MonolithicModel monolithic_from_json(const nlohmann::json& j) {
    if (!j.contains("kind") || j.at("kind").get<std::string>() != "monolithic")
        throw CorruptFileError("model document: expected kind 'monolithic'");
    if (j.at("format_version").get<int>() != kModelFormatVersion)
        throw VersionMismatchError("model document: unsupported format_version");
    MonolithicModel m;
    m.state_dim = j.at("state_dim").get<int>();
    m.object_dim = j.at("object_dim").get<int>();
    m.action_dim = j.at("action_dim").get<int>();
    m.horizon = j.at("horizon").get<int>();
    m.discount = j.at("discount").get<double>();
    m.multi_step_loss = j.at("multi_step_loss").get<bool>();
    m.net = nn::net_from_json(j.at("net"));
    if (m.net.input_dim() != m.state_dim + m.object_dim + m.action_dim)
        throw CorruptFileError("monolithic model document: network dimensions inconsistent");
    return m;
}

AdaptResult online_adapt(const InHandEnv& env_proto, const ForwardModel& internal,
                         const AdaptSchedule& schedule, const PlanBudget& budget, uint64_t seed,
                         bool end2end) {
    AdaptResult result;
    result.internal = internal;
    result.external =
        make_external_model(internal.state_dim, schedule.hidden, schedule.activation, seed);
    result.buffer.state_dim = internal.state_dim + kObjectFeatureDim;
    result.buffer.action_dim = internal.action_dim;
    result.buffer.hand_name = env_proto.hand.name;
    result.buffer.seed = seed;

    nn::Grads grads_ext = nn::make_grads(result.external.net);
    nn::Grads grads_int = nn::make_grads(result.internal.net);
    bool normalizers_fit = false;
    Rng train_rng(seed, 900001);
    long env_steps = 0;
    int episode_id = 0;

    const Dynamics dyn = factorized_dynamics(result.internal, result.external);

    for (int iter = 0; iter < schedule.iterations; ++iter) {
        const bool warmup = iter < schedule.warmup_iterations;
        int successes = 0;
        double reward_sum = 0.0;
        long reward_count = 0;
        for (int r = 0; r < schedule.rollouts_per_iteration; ++r) {
            Rng rng(seed, 10007ULL * static_cast<uint64_t>(iter) + static_cast<uint64_t>(r));
            InHandEnv env = env_proto;
            env.reset();
            const SampledEpisode episode = sample_episode(env, schedule, rng);
            auto plan_action = [&](const Vec& z, uint64_t plan_seed) {
                const TrajectoryCost cost = make_reorient_cost(episode.task, internal.state_dim);
                const ActionDistribution init = wide_distribution(budget.horizon, dyn.action_dim);
                const PlanResult plan = cem_refine(dyn, init, z, cost, budget, plan_seed);
                return Vec(plan.actions.row(0), plan.actions.row(0) + plan.actions.cols);
            };
            const RolloutOutcome outcome = run_episode(env, episode, schedule, warmup, rng, plan_action,
                                                       result.buffer, episode_id++);
            if (outcome.success) ++successes;
            reward_sum += outcome.reward_sum;
            reward_count += outcome.reward_count;
            env_steps += outcome.steps;
        }
        result.curve.push_back({env_steps,
                                static_cast<double>(successes) / schedule.rollouts_per_iteration,
                                reward_count > 0 ? reward_sum / static_cast<double>(reward_count) : 0.0});

        if (result.buffer.empty()) continue;
        // "retrain" is a fresh fixed-budget fit of the interaction model on
        // the grown buffer (the pretrained internal model persists; end2end
        // fine-tunes a persistent copy instead)
        if (!end2end) {
            result.external = make_external_model(internal.state_dim, schedule.hidden,
                                                  schedule.activation,
                                                  seed + 7919ULL * static_cast<uint64_t>(iter));
            normalizers_fit = false;
        }
        if (!normalizers_fit) {
            fit_external_normalizers(result.external, result.buffer);
            normalizers_fit = true;
        }
        nn::AdamState adam_ext = nn::make_adam(result.external.net, schedule.learning_rate);
        nn::AdamState adam_int = nn::make_adam(result.internal.net, schedule.learning_rate);
        const int horizon = usable_horizon(result.buffer, schedule.loss_horizon);
        if (horizon == 0) continue;
        const auto starts = valid_window_starts(result.buffer, horizon);
        std::vector<nn::Tape> tapes_int(horizon), tapes_ext(horizon);
        for (int step = 0; step < schedule.train_steps_per_iteration; ++step) {
            grads_ext.zero();
            if (end2end) grads_int.zero();
            const int batch = std::min<int>(schedule.batch, static_cast<int>(starts.size()));
            const double inv_batch = 1.0 / static_cast<double>(batch);
            for (int b = 0; b < batch; ++b) {
                const size_t w =
                    starts[static_cast<size_t>(train_rng.uniform_int(static_cast<int>(starts.size())))];
                factorized_window(result.internal, result.external, result.buffer, w, horizon,
                                  schedule.loss_discount, inv_batch, tapes_int, tapes_ext, &grads_ext,
                                  end2end ? &grads_int : nullptr);
            }
            nn::adam_step(adam_ext, result.external.net, grads_ext);
            if (end2end) nn::adam_step(adam_int, result.internal.net, grads_int);
        }
        if (schedule.checkpoint_every > 0 && (iter + 1) % schedule.checkpoint_every == 0)
            result.checkpoints.emplace_back(iter + 1, external_to_json(result.external));
    }
    return result;
}

AdaptResult monolithic_baseline(const InHandEnv& env_proto, const AdaptSchedule& schedule,
                                const PlanBudget& budget, uint64_t seed, bool multi_step_loss) {
    const int h = env_proto.hand.state_dim();
    const int k = env_proto.hand.action_dim();
    AdaptResult result;
    result.monolithic = make_monolithic_model(h, k, schedule.hidden, schedule.activation, seed);
    result.monolithic.multi_step_loss = multi_step_loss;
    result.buffer.state_dim = h + kObjectFeatureDim;
    result.buffer.action_dim = k;
    result.buffer.hand_name = env_proto.hand.name;
    result.buffer.seed = seed;

    nn::Grads grads = nn::make_grads(result.monolithic.net);
    bool normalizers_fit = false;
    Rng train_rng(seed, 900001);
    long env_steps = 0;
    int episode_id = 0;

    const Dynamics dyn = monolithic_dynamics(result.monolithic);

    for (int iter = 0; iter < schedule.iterations; ++iter) {
        const bool warmup = iter < schedule.warmup_iterations;
        int successes = 0;
        double reward_sum = 0.0;
        long reward_count = 0;
        for (int r = 0; r < schedule.rollouts_per_iteration; ++r) {
            Rng rng(seed, 10007ULL * static_cast<uint64_t>(iter) + static_cast<uint64_t>(r));
            InHandEnv env = env_proto;
            env.reset();
            const SampledEpisode episode = sample_episode(env, schedule, rng);
            auto plan_action = [&](const Vec& z, uint64_t plan_seed) {
                const TrajectoryCost cost = make_reorient_cost(episode.task, h);
                const ActionDistribution init = wide_distribution(budget.horizon, dyn.action_dim);
                const PlanResult plan = cem_refine(dyn, init, z, cost, budget, plan_seed);
                return Vec(plan.actions.row(0), plan.actions.row(0) + plan.actions.cols);
            };
            const RolloutOutcome outcome = run_episode(env, episode, schedule, warmup, rng, plan_action,
                                                       result.buffer, episode_id++);
            if (outcome.success) ++successes;
            reward_sum += outcome.reward_sum;
            reward_count += outcome.reward_count;
            env_steps += outcome.steps;
        }
        result.curve.push_back({env_steps,
                                static_cast<double>(successes) / schedule.rollouts_per_iteration,
                                reward_count > 0 ? reward_sum / static_cast<double>(reward_count) : 0.0});

        if (result.buffer.empty()) continue;
        result.monolithic = make_monolithic_model(h, k, schedule.hidden, schedule.activation,
                                                  seed + 7919ULL * static_cast<uint64_t>(iter));
        result.monolithic.multi_step_loss = multi_step_loss;
        fit_monolithic_normalizers(result.monolithic, result.buffer);
        normalizers_fit = true;
        nn::AdamState adam = nn::make_adam(result.monolithic.net, schedule.learning_rate);
        const int horizon = multi_step_loss ? usable_horizon(result.buffer, schedule.loss_horizon) : 1;
        if (horizon == 0) continue;
        const auto starts = valid_window_starts(result.buffer, horizon);
        std::vector<nn::Tape> tapes(horizon);
        for (int step = 0; step < schedule.train_steps_per_iteration; ++step) {
            grads.zero();
            const int batch = std::min<int>(schedule.batch, static_cast<int>(starts.size()));
            const double inv_batch = 1.0 / static_cast<double>(batch);
            for (int b = 0; b < batch; ++b) {
                const size_t w =
                    starts[static_cast<size_t>(train_rng.uniform_int(static_cast<int>(starts.size())))];
                monolithic_window(result.monolithic, result.buffer, w, horizon, schedule.loss_discount,
                                  inv_batch, tapes, &grads);
            }
            nn::adam_step(adam, result.monolithic.net, grads);
        }
        if (schedule.checkpoint_every > 0 && (iter + 1) % schedule.checkpoint_every == 0)
            result.checkpoints.emplace_back(iter + 1, monolithic_to_json(result.monolithic));
    }
    return result;
}

}  // namespace dexkit
