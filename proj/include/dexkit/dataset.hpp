#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dexkit/hand.hpp"
#include "dexkit/linalg.hpp"

namespace dexkit {

// One (s_t, a_t, s_{t+1}) record. States are fingertip positions (H = 3F).
struct Transition {
    Vec state;
    Vec action;
    Vec next_state;
    int episode = 0;
    int step = 0;
};

struct Dataset {
    int state_dim = 0;
    int action_dim = 0;
    std::string hand_name;
    uint64_t seed = 0;
    std::vector<Transition> transitions;

    size_t size() const { return transitions.size(); }
    bool empty() const { return transitions.empty(); }

    // [begin, end) index ranges of consecutive same-episode transitions
    std::vector<std::pair<size_t, size_t>> episode_ranges() const;

    void validate() const;  // dims consistent, entries finite, chaining holds
};

// Random exploration: episodes start from the rest pose and apply i.i.d.
// uniform actions over [-1,1]^K.
Dataset collect_random(const HandConfig& config, StepMode mode, int episodes, int steps_per_episode,
                       uint64_t seed);

// Flat binary persistence with a versioned header; round-trips bit-exactly.
inline constexpr uint32_t kDatasetFormatVersion = 1;
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace dexkit
