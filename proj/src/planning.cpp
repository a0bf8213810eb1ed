#include "dexkit/planning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dexkit {

Dynamics dynamics_of(const ForwardModel& model) {
    Dynamics d;
    d.state_dim = model.state_dim;
    d.action_dim = model.action_dim;
    d.step = [&model](std::span<const double> s, std::span<const double> a, Vec& out) {
        model.predict(s, a, out);
    };
    d.vjp = [&model](std::span<const double> s, std::span<const double> a, std::span<const double> d_next,
                     Vec& d_s, Vec& d_a) {
        thread_local Vec input, out, din;
        thread_local nn::Tape tape;
        input.resize(s.size() + a.size());
        std::copy(s.begin(), s.end(), input.begin());
        std::copy(a.begin(), a.end(), input.begin() + static_cast<long>(s.size()));
        nn::net_forward_tape(model.net, input, tape, out);
        nn::net_backward(model.net, tape, d_next, nullptr, &din);
        d_s.resize(s.size());
        d_a.resize(a.size());
        // s' = s + f(s, a): identity path plus the network path
        for (size_t i = 0; i < s.size(); ++i) d_s[i] = d_next[i] + din[i];
        for (size_t i = 0; i < a.size(); ++i) d_a[i] = din[s.size() + i];
    };
    return d;
}

double reach_error(std::span<const double> tips, std::span<const double> target_tips) {
    if (tips.size() != target_tips.size() || tips.size() % 3 != 0)
        throw ShapeError("reach_error: tip arrays must match and have 3 entries per finger");
    const size_t fingers = tips.size() / 3;
    double total = 0.0;
    for (size_t f = 0; f < fingers; ++f) {
        double d2 = 0.0;
        for (size_t c = 0; c < 3; ++c) {
            const double d = tips[3 * f + c] - target_tips[3 * f + c];
            d2 += d * d;
        }
        total += std::sqrt(d2);
    }
    return total / static_cast<double>(fingers);
}

TrajectoryCost make_reach_cost(Vec target) {
    constexpr double kShapingWeight = 0.1;
    TrajectoryCost cost;
    cost.value = [target](const std::vector<Vec>& states) {
        const size_t steps = states.size() - 1;
        double terminal = distance(states.back(), target);
        if (steps == 0) return terminal;
        double shaping = 0.0;
        for (size_t t = 1; t < states.size(); ++t) shaping += distance(states[t], target);
        return terminal + kShapingWeight * shaping / static_cast<double>(steps);
    };
    cost.gradient = [target](const std::vector<Vec>& states, std::vector<Vec>& d_states) {
        const size_t steps = states.size() - 1;
        d_states.assign(states.size(), Vec(target.size(), 0.0));
        if (steps == 0) return;
        auto add_unit = [&](size_t t, double w) {
            const double dist = distance(states[t], target);
            if (dist <= 0.0) return;  // subgradient 0 exactly at the target
            for (size_t i = 0; i < target.size(); ++i)
                d_states[t][i] += w * (states[t][i] - target[i]) / dist;
        };
        add_unit(states.size() - 1, 1.0);
        const double shaping_w = kShapingWeight / static_cast<double>(steps);
        for (size_t t = 1; t < states.size(); ++t) add_unit(t, shaping_w);
    };
    return cost;
}

ActionDistribution wide_distribution(int horizon, int action_dim) {
    ActionDistribution d;
    d.mean = Mat(horizon, action_dim, 0.0);
    d.stddev = Mat(horizon, action_dim, 1.0);
    return d;
}

ActionDistribution tile_distribution(const GaussianAction& single, int horizon) {
    const int k = static_cast<int>(single.mean.size());
    ActionDistribution d;
    d.mean = Mat(horizon, k);
    d.stddev = Mat(horizon, k);
    for (int t = 0; t < horizon; ++t)
        for (int i = 0; i < k; ++i) {
            d.mean(t, i) = single.mean[i];
            d.stddev(t, i) = single.stddev[i];
        }
    return d;
}

void PlanBudget::validate() const {
    if (horizon < 1) throw ConfigError("plan budget: horizon must be >= 1");
    if (cem_iterations < 1) throw ConfigError("plan budget: cem_iterations must be >= 1");
    if (samples < 1) throw ConfigError("plan budget: samples must be >= 1");
    if (elites < 1 || elites > samples) throw ConfigError("plan budget: need 1 <= elites <= samples");
    if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("plan budget: beta must lie in (0,1]");
}

namespace {

double rollout_cost(const Dynamics& dynamics, const Vec& s0, const Mat& actions,
                    const TrajectoryCost& cost, std::vector<Vec>& states) {
    states.resize(static_cast<size_t>(actions.rows) + 1);
    states[0] = s0;
    for (int t = 0; t < actions.rows; ++t) {
        std::span<const double> a(actions.row(t), static_cast<size_t>(actions.cols));
        dynamics.step(states[t], a, states[t + 1]);
    }
    return cost.value(states);
}

}  // namespace

PlanResult cem_refine(const Dynamics& dynamics, const ActionDistribution& init, const Vec& s0,
                      const TrajectoryCost& cost, const PlanBudget& budget, uint64_t seed) {
    budget.validate();
    if (init.horizon() != budget.horizon || init.action_dim() != dynamics.action_dim)
        throw ShapeError("cem_refine: init distribution must be horizon x action_dim");
    if (static_cast<int>(s0.size()) != dynamics.state_dim) throw ShapeError("cem_refine: bad initial state");

    const int t0 = budget.horizon;
    const int k = dynamics.action_dim;
    Rng rng(seed);

    ActionDistribution dist = init;
    PlanResult result;
    result.samples_used = budget.planning_samples();

    std::vector<Mat> candidates(budget.samples, Mat(t0, k));
    std::vector<double> costs(budget.samples);
    std::vector<int> order(budget.samples);
    std::vector<Vec> states;

    for (int iter = 0; iter < budget.cem_iterations; ++iter) {
        for (int c = 0; c < budget.samples; ++c) {
            Mat& a = candidates[c];
            for (int t = 0; t < t0; ++t)
                for (int i = 0; i < k; ++i)
                    a(t, i) = clamp(dist.mean(t, i) + dist.stddev(t, i) * rng.normal(), -1.0, 1.0);
        }
        int finite_costs = 0;
        for (int c = 0; c < budget.samples; ++c) {
            const double value = rollout_cost(dynamics, s0, candidates[c], cost, states);
            costs[c] = std::isnan(value) ? std::numeric_limits<double>::infinity() : value;
            if (std::isfinite(costs[c])) ++finite_costs;
        }
        if (finite_costs == 0) throw PlanningError("cem_refine: every candidate cost was NaN");

        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return costs[a] < costs[b]; });

        if (costs[order[0]] < result.cost) {
            result.cost = costs[order[0]];
            result.actions = candidates[order[0]];
        }
        result.best_cost_trace.push_back(result.cost);

        const int n_elites = std::min(budget.elites, finite_costs);
        for (int t = 0; t < t0; ++t)
            for (int i = 0; i < k; ++i) {
                double mean = 0.0;
                for (int e = 0; e < n_elites; ++e) mean += candidates[order[e]](t, i);
                mean /= static_cast<double>(n_elites);
                double var = 0.0;
                for (int e = 0; e < n_elites; ++e) {
                    const double d = candidates[order[e]](t, i) - mean;
                    var += d * d;
                }
                const double stddev = std::sqrt(var / static_cast<double>(n_elites));
                // beta is the filtering/momentum weight of the old distribution
                dist.mean(t, i) = budget.beta * dist.mean(t, i) + (1.0 - budget.beta) * mean;
                dist.stddev(t, i) = budget.beta * dist.stddev(t, i) + (1.0 - budget.beta) * stddev;
            }
        if (budget.record_distributions) result.distribution_trace.push_back(dist);
    }
    return result;
}

PlanResult bidirectional_plan(const ForwardModel& fm, const InverseModel& im, const Vec& state,
                              const Vec& target, const TrajectoryCost* cost, const PlanBudget& budget,
                              uint64_t seed) {
    const GaussianAction init = inverse_distribution(im, state, target);
    const ActionDistribution dist = tile_distribution(init, budget.horizon);
    const TrajectoryCost reach = cost == nullptr ? make_reach_cost(target) : TrajectoryCost{};
    return cem_refine(dynamics_of(fm), dist, state, cost == nullptr ? reach : *cost, budget, seed);
}

PlanResult plain_cem_plan(const ForwardModel& fm, const Vec& state, const Vec& target,
                          const TrajectoryCost* cost, const PlanBudget& budget, uint64_t seed) {
    const ActionDistribution dist = wide_distribution(budget.horizon, fm.action_dim);
    const TrajectoryCost reach = cost == nullptr ? make_reach_cost(target) : TrajectoryCost{};
    return cem_refine(dynamics_of(fm), dist, state, cost == nullptr ? reach : *cost, budget, seed);
}

PlanResult random_shoot(const Dynamics& dynamics, const Vec& s0, const TrajectoryCost& cost, int horizon,
                        int n_samples, uint64_t seed) {
    if (n_samples < 1) throw ConfigError("random_shoot: need n_samples >= 1");
    Rng rng(seed);
    PlanResult result;
    result.samples_used = n_samples;
    Mat actions(horizon, dynamics.action_dim);
    std::vector<Vec> states;
    for (int c = 0; c < n_samples; ++c) {
        for (double& x : actions.data) x = rng.uniform(-1.0, 1.0);
        const double value = rollout_cost(dynamics, s0, actions, cost, states);
        if (!std::isnan(value) && value < result.cost) {
            result.cost = value;
            result.actions = actions;
        }
    }
    if (!std::isfinite(result.cost)) throw PlanningError("random_shoot: every candidate cost was NaN");
    result.best_cost_trace.push_back(result.cost);
    return result;
}

namespace {

void cost_state_gradient(const TrajectoryCost& cost, const std::vector<Vec>& states,
                         std::vector<Vec>& d_states) {
    if (cost.gradient) {
        cost.gradient(states, d_states);
        return;
    }
    // central differences over state coordinates (s0 is fixed, skip it)
    const double h = 1e-6;
    d_states.assign(states.size(), Vec(states[0].size(), 0.0));
    std::vector<Vec> probe = states;
    for (size_t t = 1; t < states.size(); ++t)
        for (size_t i = 0; i < states[t].size(); ++i) {
            const double saved = probe[t][i];
            probe[t][i] = saved + h;
            const double up = cost.value(probe);
            probe[t][i] = saved - h;
            const double down = cost.value(probe);
            probe[t][i] = saved;
            d_states[t][i] = (up - down) / (2.0 * h);
        }
}

}  // namespace

PlanResult gradient_plan(const Dynamics& dynamics, const Vec& s0, const std::vector<Mat>& inits,
                         const TrajectoryCost& cost, int steps, double learning_rate) {
    if (inits.empty()) throw ConfigError("gradient_plan: need at least one init sequence");
    if (!dynamics.vjp) throw ConfigError("gradient_plan: dynamics has no vector-Jacobian product");

    PlanResult result;
    result.samples_used = static_cast<long>(inits.size()) * steps;
    std::vector<Vec> states, d_states;
    Vec d_state, d_action, carried;

    for (const Mat& init : inits) {
        Mat actions = init;
        const int t0 = actions.rows;
        for (int step = 0; step < steps; ++step) {
            rollout_cost(dynamics, s0, actions, cost, states);
            cost_state_gradient(cost, states, d_states);
            carried = d_states[static_cast<size_t>(t0)];
            for (int t = t0 - 1; t >= 0; --t) {
                std::span<const double> a(actions.row(t), static_cast<size_t>(actions.cols));
                dynamics.vjp(states[t], a, carried, d_state, d_action);
                if (!all_finite(d_action) || !all_finite(d_state))
                    throw NumericError("gradient_plan: non-finite gradient");
                for (int i = 0; i < actions.cols; ++i)
                    actions(t, i) = clamp(actions(t, i) - learning_rate * d_action[i], -1.0, 1.0);
                if (t > 0) {
                    for (size_t i = 0; i < d_state.size(); ++i) carried[i] = d_state[i] + d_states[t][i];
                }
            }
        }
        const double value = rollout_cost(dynamics, s0, actions, cost, states);
        if (!std::isnan(value) && value < result.cost) {
            result.cost = value;
            result.actions = actions;
        }
    }
    if (!std::isfinite(result.cost)) throw PlanningError("gradient_plan: every candidate cost was NaN");
    result.best_cost_trace.push_back(result.cost);
    return result;
}

EpisodeRecord mpc_rollout(const HandConfig& config, StepMode mode, const SimState& start,
                          const Vec& target_tips, const Planner& planner, int max_steps,
                          int replan_every, bool stop_on_success) {
    if (replan_every < 1) throw ConfigError("mpc_rollout: replan_every must be >= 1");
    EpisodeRecord record;
    SimState state = start;
    record.states.push_back(state.tips);
    record.errors.push_back(reach_error(state.tips, target_tips));

    auto complete = [&] { return record.errors.back() < config.success_threshold; };
    while (record.steps < max_steps) {
        if (stop_on_success && complete()) break;
        const PlanResult plan = planner(state);
        record.samples_used += plan.samples_used;
        const int to_execute = std::min(replan_every, plan.actions.rows);
        for (int t = 0; t < to_execute && record.steps < max_steps; ++t) {
            Vec action(plan.actions.row(t), plan.actions.row(t) + plan.actions.cols);
            state = env_step(config, state, action, mode);
            record.actions.push_back(std::move(action));
            record.states.push_back(state.tips);
            record.errors.push_back(reach_error(state.tips, target_tips));
            record.steps += 1;
            if (stop_on_success && complete()) break;
        }
    }
    record.final_error = record.errors.back();
    record.success = record.final_error < config.success_threshold;
    return record;
}

}  // namespace dexkit
