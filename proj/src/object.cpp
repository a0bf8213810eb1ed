#include "dexkit/object.hpp"

#include <cmath>

namespace dexkit {

namespace {

bool in_contact(const double* tip, const ObjectParams& p) {
    const Vec3 d = Vec3{tip[0], tip[1], tip[2]} - p.center;
    return norm(d) <= p.effective_radius();
}

}  // namespace

int tips_in_contact(std::span<const double> tips, const ObjectParams& params) {
    int count = 0;
    for (size_t i = 0; i + 2 < tips.size(); i += 3)
        if (in_contact(tips.data() + i, params)) ++count;
    return count;
}

ObjectState object_step(const ObjectState& obj, std::span<const double> prev_tips,
                        std::span<const double> new_tips, const ObjectParams& params) {
    if (prev_tips.size() != new_tips.size() || prev_tips.size() % 3 != 0)
        throw ShapeError("object_step: tip arrays must have equal length, multiple of 3");
    if (obj.dropped) return obj;  // frozen

    ObjectState next = obj;
    double sweep_sum = 0.0;
    int sweep_count = 0;
    for (size_t i = 0; i < prev_tips.size(); i += 3) {
        if (!in_contact(prev_tips.data() + i, params) || !in_contact(new_tips.data() + i, params)) continue;
        const double rx = prev_tips[i] - params.center.x;
        const double ry = prev_tips[i + 1] - params.center.y;
        const double r2 = rx * rx + ry * ry;
        if (r2 < 1e-12) continue;  // tip on the rotation axis has no moment arm
        const double dx = new_tips[i] - prev_tips[i];
        const double dy = new_tips[i + 1] - prev_tips[i + 1];
        sweep_sum += (rx * dy - ry * dx) / r2;
        ++sweep_count;
    }
    if (sweep_count > 0) next.z_rotation += params.rotation_gain * sweep_sum / sweep_count;

    if (tips_in_contact(new_tips, params) < 2) {
        next.miss_count += 1;
        if (next.miss_count >= params.drop_patience) next.dropped = true;
    } else {
        next.miss_count = 0;
    }
    return next;
}

void InHandEnv::reset() {
    hand_state = make_grasp_state(hand);
    object = ObjectState{};
    object.x = params.center.x;
    object.y = params.center.y;
}

void InHandEnv::step(std::span<const double> action) {
    const Vec prev = hand_state.tips;
    hand_state = env_step(hand, hand_state, action, mode);
    object = object_step(object, prev, hand_state.tips, params);
}

InHandEnv make_inhand_env(const HandConfig& hand, const ObjectParams& params, StepMode mode) {
    InHandEnv env;
    env.hand = hand;
    env.params = params;
    env.mode = mode;
    env.reset();
    return env;
}

ObjectParams default_object_params(const HandConfig& hand) {
    // The arc fingers' chain rays all pass the arc center (the xy origin)
    // with a common-side offset of roughly arc_radius * sin(grip_offset), so
    // fingertips sweep coherently around it as they flex. Placing the object
    // there (at grasp-pose fingertip height) makes curling spin it; the tip
    // centroid itself would sit on top of the tips and degenerate the
    // moment arms.
    const SimState grip = make_grasp_state(hand);
    double z = 0.0;
    const int arc_fingers = hand.num_fingers - 1;
    for (int f = 1; f < hand.num_fingers; ++f) z += grip.tips[3 * f + 2];
    ObjectParams params;
    if (arc_fingers > 0) params.center = {0.0, 0.0, z / arc_fingers};
    params.grasp_radius = 0.065;
    params.rotation_gain = 0.6;
    params.drop_patience = 10;
    return params;
}

}  // namespace dexkit
