#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "dexkit/hand.hpp"
#include "dexkit/models.hpp"

namespace dexkit {

// Planner-facing dynamics: a step function plus an optional vector-Jacobian
// product for gradient-based planning. Wraps a ForwardModel or any test
// dynamics.
struct Dynamics {
    int state_dim = 0;
    int action_dim = 0;
    std::function<void(std::span<const double>, std::span<const double>, Vec&)> step;
    // accumulate dL/ds and dL/da given upstream dL/ds_next (may be empty)
    std::function<void(std::span<const double>, std::span<const double>, std::span<const double>, Vec&, Vec&)>
        vjp;
};

Dynamics dynamics_of(const ForwardModel& model);

// Scalar score of a predicted trajectory states[0..T]. `gradient` (optional)
// fills d/d states; planners fall back to central differences when absent.
struct TrajectoryCost {
    std::function<double(const std::vector<Vec>&)> value;
    std::function<void(const std::vector<Vec>&, std::vector<Vec>&)> gradient;
};

// Reach objective: terminal fingertip distance to the target plus 0.1 x mean
// per-step distance shaping.
TrajectoryCost make_reach_cost(Vec target);

double reach_error(std::span<const double> tips, std::span<const double> target_tips);

// Per-step diagonal Gaussian over action sequences (rows = horizon steps).
struct ActionDistribution {
    Mat mean;
    Mat stddev;

    int horizon() const { return mean.rows; }
    int action_dim() const { return mean.cols; }
};

ActionDistribution wide_distribution(int horizon, int action_dim);  // box center, std = half box width
ActionDistribution tile_distribution(const GaussianAction& single, int horizon);

struct PlanBudget {
    int horizon = 1;         // T0
    int cem_iterations = 5;  // N_cem
    int samples = 400;       // N_s
    int elites = 20;
    double beta = 0.1;  // moving-average filter coefficient
    bool record_distributions = false;

    long planning_samples() const { return static_cast<long>(cem_iterations) * samples; }
    void validate() const;
};

struct PlanResult {
    Mat actions;  // horizon x K, best-ever sequence
    double cost = std::numeric_limits<double>::infinity();
    long samples_used = 0;
    Vec best_cost_trace;  // best-ever cost after each CEM iteration
    std::vector<ActionDistribution> distribution_trace;  // filled when record_distributions
};

// Iterative sampling / elite refit. Candidate c draws its noise in order
// (step-major, then action dimension); elites are the lowest-cost candidates
// with ties broken by sample index; the distribution update is
// new = (1 - beta) * old + beta * elite_stat.
PlanResult cem_refine(const Dynamics& dynamics, const ActionDistribution& init, const Vec& s0,
                      const TrajectoryCost& cost, const PlanBudget& budget, uint64_t seed);

// Inverse-model initialization expanded over the horizon, then CEM. A null
// cost means the default reach cost toward target.
PlanResult bidirectional_plan(const ForwardModel& fm, const InverseModel& im, const Vec& state,
                              const Vec& target, const TrajectoryCost* cost, const PlanBudget& budget,
                              uint64_t seed);

// Plain CEM baseline from the wide distribution.
PlanResult plain_cem_plan(const ForwardModel& fm, const Vec& state, const Vec& target,
                          const TrajectoryCost* cost, const PlanBudget& budget, uint64_t seed);

PlanResult random_shoot(const Dynamics& dynamics, const Vec& s0, const TrajectoryCost& cost, int horizon,
                        int n_samples, uint64_t seed);

// Gradient descent on action sequences through the dynamics; each init is
// optimized independently and the best result returned. samples_used =
// batch x steps.
PlanResult gradient_plan(const Dynamics& dynamics, const Vec& s0, const std::vector<Mat>& inits,
                         const TrajectoryCost& cost, int steps, double learning_rate);

struct EpisodeRecord {
    std::vector<Vec> states;  // fingertips, one per executed step plus the start
    std::vector<Vec> actions;
    Vec errors;  // reach error per recorded state
    double final_error = std::numeric_limits<double>::infinity();
    bool success = false;
    long samples_used = 0;
    int steps = 0;
};

using Planner = std::function<PlanResult(const SimState&)>;

// Replan each step (or every replan_every steps), execute the leading
// actions, observe the true state, repeat until the target is reached or
// max_steps is exhausted. stop_on_success=false runs the full step budget
// (fixed-length benchmark episodes) and judges success by the final state.
EpisodeRecord mpc_rollout(const HandConfig& config, StepMode mode, const SimState& start,
                          const Vec& target_tips, const Planner& planner, int max_steps,
                          int replan_every = 1, bool stop_on_success = true);

}  // namespace dexkit
