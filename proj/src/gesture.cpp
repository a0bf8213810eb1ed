#include "dexkit/gesture.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dexkit::gesture {

HandGestureInfo gesture_info(const HandConfig& config) {
    HandGestureInfo info;
    const int f = config.num_fingers;
    info.roles["thumb"] = 0;
    if (f == 3) {
        info.roles["index"] = 1;
        info.roles["middle"] = 2;
    } else if (f == 4) {
        // paper-style allegro layout: 1 covers ring & little
        info.roles["ring_little"] = 1;
        info.roles["middle"] = 2;
        info.roles["index"] = 3;
    } else {
        info.roles["index"] = 1;
        info.roles["middle"] = 2;
        info.roles["ring"] = 3;
        if (f > 4) info.roles["little"] = 4;
    }
    for (int i = 0; i < f; ++i) {
        // straight = far along the chain direction and away from the curl side
        const Mat3& r = config.base_rotations[i];
        const Vec3 chain_dir{r.a[0], r.a[3], r.a[6]};
        const Vec3 curl_dir{r.a[1], r.a[4], r.a[7]};
        info.extension_dirs.push_back(normalized(chain_dir - curl_dir * 0.6));
    }
    return info;
}

namespace {

std::string vec_literal(const Vec3& v) {
    return "[" + dsl::format_number(v.x) + ", " + dsl::format_number(v.y) + ", " +
           dsl::format_number(v.z) + "]";
}

std::string extend_term(const HandGestureInfo& info, int finger) {
    return "dot(tip(" + std::to_string(finger) + "), " + vec_literal(info.extension_dirs[finger]) + ")";
}

// mean of extension terms over `fingers`
std::string extend_mean(const HandGestureInfo& info, const std::vector<int>& fingers) {
    std::string out = "mean(";
    for (size_t i = 0; i < fingers.size(); ++i) {
        if (i > 0) out += ", ";
        out += extend_term(info, fingers[i]);
    }
    return out + ")";
}

std::vector<int> all_but(int count, const std::vector<int>& excluded) {
    std::vector<int> out;
    for (int i = 0; i < count; ++i)
        if (std::find(excluded.begin(), excluded.end(), i) == excluded.end()) out.push_back(i);
    return out;
}

int role_or(const HandGestureInfo& info, const std::string& role, int fallback) {
    auto it = info.roles.find(role);
    return it == info.roles.end() ? fallback : it->second;
}

}  // namespace

std::string ok_cost_source(const HandConfig& config) {
    const HandGestureInfo info = gesture_info(config);
    const int thumb = role_or(info, "thumb", 0);
    const int index = role_or(info, "index", config.num_fingers - 1);
    const std::vector<int> rest = all_but(config.num_fingers, {thumb, index});
    std::string cost =
        "norm(tip(" + std::to_string(thumb) + ") - tip(" + std::to_string(index) + "))";
    if (!rest.empty()) cost += " - " + extend_mean(info, rest);
    return cost;
}

std::string thumbup_cost_source(const HandConfig& config) {
    const HandGestureInfo info = gesture_info(config);
    const int thumb = role_or(info, "thumb", 0);
    const std::vector<int> rest = all_but(config.num_fingers, {thumb});
    std::string cost = "neg(" + extend_term(info, thumb) + ")";
    if (!rest.empty()) cost += " + " + extend_mean(info, rest);
    return cost;
}

std::string scissors_cost_source(const HandConfig& config) {
    const HandGestureInfo info = gesture_info(config);
    const int thumb = role_or(info, "thumb", 0);
    const int index = role_or(info, "index", config.num_fingers - 1);
    const int middle = role_or(info, "middle", std::max(0, config.num_fingers - 2));
    const std::vector<int> others = all_but(config.num_fingers, {thumb, index, middle});
    std::string cost = others.empty()
                           ? std::string("0")
                           : "norm(tip(" + std::to_string(thumb) + ") - tip(" +
                                 std::to_string(others.front()) + "))";
    cost += " - " + extend_mean(info, {index, middle});
    return cost;
}

std::string rockandroll_cost_source(const HandConfig& config) {
    const HandGestureInfo info = gesture_info(config);
    const int thumb = role_or(info, "thumb", 0);
    const int middle = role_or(info, "middle", std::max(0, config.num_fingers - 2));
    const std::vector<int> rest = all_but(config.num_fingers, {thumb, middle});
    std::string cost = "norm(tip(" + std::to_string(thumb) + ") - tip(" + std::to_string(middle) + "))";
    if (!rest.empty()) cost += " - " + extend_mean(info, rest);
    return cost;
}

std::string call_cost_source(const HandConfig& config) {
    const HandGestureInfo info = gesture_info(config);
    const int thumb = role_or(info, "thumb", 0);
    const int little = role_or(info, "little", role_or(info, "ring_little", config.num_fingers - 1));
    const std::vector<int> rest = all_but(config.num_fingers, {thumb, little});
    std::string cost = "neg(" + extend_term(info, thumb) + ") - " + extend_term(info, little);
    if (!rest.empty()) cost += " + " + extend_mean(info, rest);
    return cost;
}

std::vector<llm::Exemplar> default_exemplars(const HandConfig& config) {
    return {{"thumb up", thumbup_cost_source(config)}, {"ok", ok_cost_source(config)}};
}

std::map<std::string, std::string> default_canned_replies(const HandConfig& config) {
    auto fenced = [](const std::string& body, const std::string& note) {
        return note + "\n```\n" + body + "\n```\n";
    };
    std::map<std::string, std::string> replies;
    replies["scissors"] = fenced(scissors_cost_source(config), "Scissors keeps index and middle straight.");
    replies["rock_and_roll"] =
        fenced(rockandroll_cost_source(config), "Rock and roll: thumb holds the middle finger down.");
    replies["call"] = fenced(call_cost_source(config), "Call me: thumb and little finger extended.");
    replies["ok"] = fenced(ok_cost_source(config), "OK: thumb-index pinch, other fingers extended.");
    replies["thumb_up"] = fenced(thumbup_cost_source(config), "Thumb up.");
    replies["malformed"] = "```\nnorm(tip(0) -\n```\n";  // parse-error path
    return replies;
}

GestureResult generate_gesture(const HandConfig& config, const ForwardModel& fm,
                               const InverseModel& im, const dsl::CostProgram& program,
                               const PlanBudget& budget, uint64_t seed, int target_proposals) {
    if (program.num_fingers != config.num_fingers)
        throw DimensionMismatchError("generate_gesture: program expects " +
                                     std::to_string(program.num_fingers) + " fingers, hand has " +
                                     std::to_string(config.num_fingers));
    const SimState start = make_rest_state(config);

    // propose a target fingertip layout by scoring reachable poses
    Rng rng(seed, 7);
    Vec best_target = start.tips;
    double best_value = dsl::eval_cost(program, start.tips);
    for (int i = 0; i < target_proposals; ++i) {
        const Vec candidate = sample_reachable_target(config, rng);
        const double value = dsl::eval_cost(program, candidate);
        if (value < best_value) {
            best_value = value;
            best_target = candidate;
        }
    }

    TrajectoryCost cost;
    cost.value = [&program](const std::vector<Vec>& states) {
        return dsl::eval_cost(program, states.back());
    };

    const GaussianAction init = inverse_distribution(im, start.tips, best_target);
    const ActionDistribution dist = tile_distribution(init, budget.horizon);
    const PlanResult plan = cem_refine(dynamics_of(fm), dist, start.tips, cost, budget, seed);

    GestureResult result;
    result.action.assign(plan.actions.row(0), plan.actions.row(0) + plan.actions.cols);
    const SimState achieved = env_step(config, start, result.action, StepMode::quasi_static);
    result.achieved_tips = achieved.tips;
    result.achieved_cost = dsl::eval_cost(program, achieved.tips);
    result.predicted_cost = plan.cost;
    result.samples_used = plan.samples_used;
    result.program_source = program.source;
    return result;
}

}  // namespace dexkit::gesture
