#pragma once

#include "dexkit/hand.hpp"
#include "dexkit/linalg.hpp"

namespace dexkit {

// Planar object that fingertips can spin about the z axis. Once dropped its
// state is frozen.
struct ObjectState {
    double z_rotation = 0.0;  // radians
    double x = 0.0;           // meters
    double y = 0.0;
    bool dropped = false;
    int miss_count = 0;  // consecutive steps with fewer than 2 tips in contact
};

struct ObjectParams {
    Vec3 center{0.0, 0.0, 0.035};  // grasp reference point (matches ObjectState x/y at reset)
    double grasp_radius = 0.055;   // tips within this 3D distance count as in contact
    double rotation_gain = 1.0;    // scales the mean tangential sweep of in-contact tips
    int drop_patience = 10;
    double size = 1.0;  // object size scale; multiplies grasp_radius

    double effective_radius() const { return grasp_radius * size; }
};

// Rotation drag from fingertip motion: every tip in contact contributes its
// angular sweep about the object center (tangential displacement divided by
// its radius); the object rotates by rotation_gain times the mean sweep.
// Fewer than 2 tips in contact for drop_patience consecutive steps drops the
// object.
ObjectState object_step(const ObjectState& obj, std::span<const double> prev_tips,
                        std::span<const double> new_tips, const ObjectParams& params);

int tips_in_contact(std::span<const double> tips, const ObjectParams& params);

// Hand plus grasped object. Value-like: copies step independently.
struct InHandEnv {
    HandConfig hand;
    ObjectParams params;
    StepMode mode = StepMode::sequential;
    SimState hand_state;
    ObjectState object;

    void reset();
    void step(std::span<const double> action);
};

InHandEnv make_inhand_env(const HandConfig& hand, const ObjectParams& params,
                          StepMode mode = StepMode::sequential);

// Object placed under the centroid of the arc fingers' rest tips (the thumb
// is excluded: it grips from below).
ObjectParams default_object_params(const HandConfig& hand);

}  // namespace dexkit
