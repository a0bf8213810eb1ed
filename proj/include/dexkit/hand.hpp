#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dexkit/linalg.hpp"
#include "dexkit/rng.hpp"

namespace dexkit {

enum class ActuationMode { direct, coupled, tendon };

std::string to_string(ActuationMode m);
ActuationMode actuation_mode_from_string(const std::string& s);

// Which frame-skipping regime an env_step runs under.
enum class StepMode { quasi_static, sequential };

// Parametric articulated hand. Each finger is a planar revolute chain placed
// in space by a rigid per-finger base frame; actuators drive joints directly,
// through a coupling map (K < DoF) or through signed tendon gains (K > DoF).
// Actions live in [-1, 1]^K for every mode.
struct HandConfig {
    std::string name = "custom";
    int num_fingers = 0;
    std::vector<int> joints_per_finger;
    Vec link_lengths;   // per joint, finger-major
    Vec joint_lo;       // radians, per joint
    Vec joint_hi;
    ActuationMode actuation_mode = ActuationMode::direct;
    Mat coupling_matrix;  // DoF x K, coupled mode
    Mat tendon_matrix;    // DoF x K, tendon mode (signed gains, rad/frame per activation)
    double response_gain = 0.05;            // fraction of commanded delta realized per frame
    int skipped_frames_quasistatic = 50;
    int skipped_frames_sequential = 10;
    double success_threshold = 0.015;        // meters
    Vec actuator_scale;                      // per actuator in [0,1], 1 = healthy
    std::vector<Vec3> base_positions;        // per finger
    std::vector<Mat3> base_rotations;        // per finger

    int dof() const;
    int action_dim() const;
    int state_dim() const { return 3 * num_fingers; }
    void validate() const;  // throws ConfigError on any violated invariant
};

// Joint configuration plus its fingertip image. `tips` is always the exact
// forward kinematics of `joint_angles`.
struct SimState {
    Vec joint_angles;
    Vec tips;       // 3 * num_fingers, finger-major (x, y, z)
    long frame = 0;
};

struct Perturbation {
    enum class Kind { actuator_failure, fatigue };
    Kind kind = Kind::actuator_failure;
    int index = 0;        // failed actuator (actuator_failure)
    double factor = 1.0;  // command scale in (0,1] (fatigue)

    static Perturbation failure(int index) { return {Kind::actuator_failure, index, 0.0}; }
    static Perturbation fatigue(double factor) { return {Kind::fatigue, 0, factor}; }
};

// Fingertip positions for the given joint angles. Throws DomainError when an
// angle lies outside its limits.
Vec forward_kinematics(const HandConfig& config, const Vec& joint_angles);

// Fingertip positions of one finger chain only (3 values appended to `out`).
void finger_tip(const HandConfig& config, int finger, const double* angles, double* out);

SimState make_rest_state(const HandConfig& config);
SimState make_state(const HandConfig& config, Vec joint_angles);

// Mid-flexion pose (45% of each joint range): the natural starting grip for
// in-hand tasks, with symmetric flex/extend authority.
SimState make_grasp_state(const HandConfig& config);

// Advance the hand by one control step: map the action to joint commands,
// integrate skipped_frames_* first-order frames, recompute fingertips.
SimState env_step(const HandConfig& config, const SimState& state, std::span<const double> action,
                  StepMode mode);

HandConfig apply_perturbation(const HandConfig& config, const Perturbation& p);

// FK image of uniform joint angles, so the returned target is reachable by
// construction.
Vec sample_reachable_target(const HandConfig& config, Rng& rng);
Vec sample_reachable_target(const HandConfig& config, uint64_t seed);

// Presets mirroring the four actuation regimes (fully actuated small/large,
// under-actuated via coupling, over-actuated via tendons).
HandConfig robotiq_like();
HandConfig allegro_like();
HandConfig shadowhand_like();
HandConfig myohand_like();
HandConfig preset_by_name(const std::string& name);
std::vector<std::string> preset_names();

// Config-file support: {"preset": "allegro_like"} or the full field set, with
// optional per-field overrides on top of a preset.
nlohmann::json hand_to_json(const HandConfig& config);
HandConfig hand_from_json(const nlohmann::json& j);

}  // namespace dexkit
