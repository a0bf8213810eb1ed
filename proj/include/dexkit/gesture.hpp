#pragma once

#include "dexkit/llm.hpp"
#include "dexkit/planning.hpp"

namespace dexkit::gesture {

// Per-hand gesture conventions: semantic finger roles and the unit direction
// each finger points along when straight (the n-hat constants baked into the
// cost programs as vector literals).
struct HandGestureInfo {
    std::map<std::string, int> roles;
    std::vector<Vec3> extension_dirs;  // one per finger
};

HandGestureInfo gesture_info(const HandConfig& config);

// Built-in cost sources (DSL text with the hand's direction constants).
std::string ok_cost_source(const HandConfig& config);
std::string thumbup_cost_source(const HandConfig& config);
std::string scissors_cost_source(const HandConfig& config);
std::string rockandroll_cost_source(const HandConfig& config);
std::string call_cost_source(const HandConfig& config);

// The two few-shot exemplars supplied to the LLM (thumb-up and OK).
std::vector<llm::Exemplar> default_exemplars(const HandConfig& config);

// Offline reply map for the canned transport, keyed by request slug. Includes
// a deliberately malformed entry under "malformed" for error-path testing.
std::map<std::string, std::string> default_canned_replies(const HandConfig& config);

struct GestureResult {
    Vec action;
    Vec achieved_tips;
    double achieved_cost = 0.0;   // program value at the simulator-verified pose
    double predicted_cost = 0.0;  // planner's best predicted cost
    long samples_used = 0;
    std::string program_source;
};

// Quasi-static gesture synthesis: propose a target pose by scoring random
// reachable fingertip layouts, initialize from the inverse model toward the
// best one, refine with CEM over the forward model, then execute the single
// action and report the simulator-verified pose.
GestureResult generate_gesture(const HandConfig& config, const ForwardModel& fm,
                               const InverseModel& im, const dsl::CostProgram& program,
                               const PlanBudget& budget, uint64_t seed, int target_proposals = 256);

}  // namespace dexkit::gesture
