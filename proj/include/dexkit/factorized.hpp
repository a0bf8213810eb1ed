#pragma once

#include <cstdint>
#include <vector>

#include "dexkit/dataset.hpp"
#include "dexkit/object.hpp"
#include "dexkit/planning.hpp"

namespace dexkit {

// Feature encoding of the object state used by the learned models:
// (cos z, sin z, x, y, dropped). Angle goes in as cos/sin so regression stays
// continuous.
inline constexpr int kObjectFeatureDim = 5;

Vec encode_object(const ObjectState& obj);
ObjectState decode_object(std::span<const double> features);

// Interaction model: maps (predicted hand state, object features) to the
// corrected hand state and the next object features. Prediction is absolute
// (a zero net yields the output normalization means). The input deliberately
// excludes the action, so its size is H + O whatever the hand's K.
struct ExternalModel {
    nn::DenseNet net;  // (H + O) -> (H + O)
    int state_dim = 0;
    int object_dim = kObjectFeatureDim;
    int horizon = 10;
    double discount = 0.95;

    void predict(std::span<const double> hand_pred, std::span<const double> object_features,
                 Vec& out) const;
};

ExternalModel make_external_model(int state_dim, const std::vector<int>& hidden,
                                  nn::Activation activation, uint64_t seed);

// One-step factorized prediction: shat = internal(s, a) with the internal
// model frozen, then (s', x') = external(shat, x).
void factorized_predict(const ForwardModel& internal, const ExternalModel& external,
                        std::span<const double> state, std::span<const double> object_features,
                        std::span<const double> action, Vec& state_next, Vec& object_next);

// Joint baseline: one network over (hand, object, action).
struct MonolithicModel {
    nn::DenseNet net;  // (H + O + K) -> (H + O)
    int state_dim = 0;
    int object_dim = kObjectFeatureDim;
    int action_dim = 0;
    int horizon = 10;
    double discount = 0.95;
    bool multi_step_loss = true;  // false = plain single-step variant

    void predict(std::span<const double> composite, std::span<const double> action, Vec& out) const;
};

MonolithicModel make_monolithic_model(int state_dim, int action_dim, const std::vector<int>& hidden,
                                      nn::Activation activation, uint64_t seed);

// Planner dynamics over the composite state [hand; object features].
Dynamics factorized_dynamics(const ForwardModel& internal, const ExternalModel& external);
Dynamics monolithic_dynamics(const MonolithicModel& model);

struct ReorientTask {
    double goal_rotation = 0.0;  // radians about z
    double goal_x = 0.0;
    double goal_y = 0.0;
    double object_size = 1.0;
    double cos_threshold = 0.95;
    double pos_threshold = 0.075;
    double weight_position = 1.0;  // lambda_1
    double weight_rotation = 1.0;  // lambda_2
    double weight_drop = 5.0;      // lambda_3

    bool complete(const ObjectState& obj) const;
};

// R = -l1 * ||pos - goal|| + l2 * cos(rot - rot_goal) - l3 * [dropped]
double reorient_reward(const ObjectState& obj, const ReorientTask& task);

// Planning objective: negated reward summed over the predicted horizon,
// decoded from the object part of the composite states.
TrajectoryCost make_reorient_cost(const ReorientTask& task, int state_dim);

// Multi-step prediction losses over composite-transition windows (states are
// [hand; object features], dimension H + O). Exposed for loss checks.
double factorized_multistep_loss(const ForwardModel& internal, const ExternalModel& external,
                                 const Dataset& buffer, std::span<const size_t> window_starts,
                                 int horizon, double discount);
double monolithic_multistep_loss(const MonolithicModel& model, const Dataset& buffer,
                                 std::span<const size_t> window_starts, int horizon, double discount);

struct AdaptSchedule {
    int iterations = 200;
    int rollouts_per_iteration = 40;
    int episode_steps = 12;
    int warmup_iterations = 1;  // iterations collected with random actions
    int train_steps_per_iteration = 150;
    int batch = 64;
    double learning_rate = 1e-4;
    int loss_horizon = 10;
    double loss_discount = 0.95;
    std::vector<int> hidden = {64, 64};
    nn::Activation activation = nn::Activation::tanh_fn;
    double goal_low = 0.35;   // |goal - start| rotation range
    double goal_high = 1.10;
    double start_rotation_range = 0.0;  // object starts at U(-range, range)
    double start_pose_jitter = 0.0;     // per-joint grasp-pose perturbation (radians)
    std::vector<double> object_sizes = {1.0};
    int checkpoint_every = 0;  // snapshot the learned model every k iterations (0 = off)
};

struct CurvePoint {
    long env_steps = 0;       // cumulative executed environment steps
    double success_rate = 0;  // over the iteration's rollouts
    double mean_reward = 0;   // mean per-step reward over the iteration
};

struct AdaptResult {
    ExternalModel external;
    ForwardModel internal;  // equals the input bit-for-bit unless end2end
    MonolithicModel monolithic;
    std::vector<CurvePoint> curve;
    Dataset buffer;  // all collected composite transitions
    std::vector<std::pair<int, nlohmann::json>> checkpoints;  // (iteration, model document)
};

// Online adaptive learning: plan with the factorized model (plain CEM over
// the composite dynamics, reorientation cost), execute, grow the buffer,
// retrain the external model with the multi-step loss. end2end additionally
// backpropagates into the internal model.
AdaptResult online_adapt(const InHandEnv& env_proto, const ForwardModel& internal,
                         const AdaptSchedule& schedule, const PlanBudget& budget, uint64_t seed,
                         bool end2end = false);

// Identical loop with the single joint model.
AdaptResult monolithic_baseline(const InHandEnv& env_proto, const AdaptSchedule& schedule,
                                const PlanBudget& budget, uint64_t seed, bool multi_step_loss = true);

// First env-step count at which the success curve reaches `level`; returns
// `fallback` when it never does.
long env_steps_to_reach(const std::vector<CurvePoint>& curve, double level, long fallback);

nlohmann::json external_to_json(const ExternalModel& m);
ExternalModel external_from_json(const nlohmann::json& j);
nlohmann::json monolithic_to_json(const MonolithicModel& m);
MonolithicModel monolithic_from_json(const nlohmann::json& j);

}  // namespace dexkit
