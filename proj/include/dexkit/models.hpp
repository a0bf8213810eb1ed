#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dexkit/dataset.hpp"
#include "dexkit/nn.hpp"
#include "dexkit/rng.hpp"

namespace dexkit {

struct TrainReport {
    Vec loss_curve;            // batch loss per optimization step
    double final_loss = 0.0;
    double holdout_mse = 0.0;  // held-out one-step MSE (mean per dimension)
};

struct ForwardHyper {
    int horizon = 1;           // S: number of chained prediction steps in the loss
    double discount = 0.95;    // alpha
    double learning_rate = 1e-4;
    double final_learning_rate_fraction = 1.0;  // < 1 = linear decay to this fraction
    int steps = 2000;
    int batch = 256;
    std::vector<int> hidden = {256, 256};
    nn::Activation activation = nn::Activation::tanh_fn;
    uint64_t seed = 0;
    double holdout_fraction = 1.0 / 11.0;  // 10:1 train/eval split
};

// Hand dynamics model: the network maps (s, a) -> state delta, and prediction
// adds the delta to s.
struct ForwardModel {
    nn::DenseNet net;
    int state_dim = 0;
    int action_dim = 0;
    int horizon = 1;
    double discount = 0.95;

    void predict(std::span<const double> state, std::span<const double> action, Vec& out) const;
    Vec predict(std::span<const double> state, std::span<const double> action) const;
};

// Action inference model: the network maps (s_t, s_target) -> action; sigma
// holds the per-dimension mean absolute residual used as the sampling stddev.
struct InverseModel {
    nn::DenseNet net;
    int state_dim = 0;
    int action_dim = 0;
    int target_shift = 1;  // t0
    Vec sigma;             // empty until estimate_sigma has run

    bool has_sigma() const { return !sigma.empty(); }
    Vec predict_action(std::span<const double> state, std::span<const double> target) const;
};

struct InverseHyper {
    int target_shift = 1;  // t0
    double learning_rate = 1e-4;
    int steps = 2000;
    int batch = 256;
    std::vector<int> hidden = {256, 256};
    nn::Activation activation = nn::Activation::tanh_fn;
    uint64_t seed = 0;
    double holdout_fraction = 1.0 / 11.0;
};

// Diagonal Gaussian over one action; samples are clipped to [-1,1]^K.
struct GaussianAction {
    Vec mean;
    Vec stddev;

    Vec sample(Rng& rng) const;
};

// Multi-step loss of Eq-style chained prediction: sum_{i<S} alpha^i
// ||s_{t+i+1} - predict(shat_{t+i}, a_{t+i})||^2 averaged over windows, with
// shat re-grounded at each window start. Exposed for loss-equivalence checks.
double forward_multistep_loss(const ForwardModel& model, const Dataset& ds,
                              std::span<const size_t> window_starts);

ForwardModel train_forward(const Dataset& ds, const ForwardHyper& hyper, TrainReport* report = nullptr);

// Open-loop rollout through the model; returns [s0, s1, ..., sT].
std::vector<Vec> rollout(const ForwardModel& model, const Vec& s0, const std::vector<Vec>& actions);

InverseModel train_inverse(const Dataset& ds, const InverseHyper& hyper, TrainReport* report = nullptr);

// sigma_k = mean |a_k - g(s_t, s_{t+t0})_k| over the dataset; stored in the
// model and returned.
Vec estimate_sigma(InverseModel& model, const Dataset& ds);

GaussianAction inverse_distribution(const InverseModel& model, std::span<const double> state,
                                    std::span<const double> target);

// Continue optimizing an already-trained model on new data only. When
// eval_data is given, records the held-out MSE every eval_every steps into
// eval_curve (index 0 = before any update).
TrainReport finetune(ForwardModel& model, const Dataset& new_data, int steps, double learning_rate,
                     uint64_t seed, const Dataset* eval_data = nullptr, Vec* eval_curve = nullptr,
                     int eval_every = 50);

// One-step MSE (mean per dimension) of the model over a dataset.
double evaluate_mse(const ForwardModel& model, const Dataset& ds);

// Window starts valid for `horizon` consecutive transitions; throws
// ConfigError when none exist.
std::vector<size_t> valid_window_starts(const Dataset& ds, int horizon);

// Indices of transitions at which an inverse pair (s_t, s_{t+t0}) -> a_t can
// be formed.
std::vector<size_t> valid_inverse_pairs(const Dataset& ds, int target_shift);

// Split a dataset by whole episodes: the last `fraction` of episodes form the
// holdout part.
std::pair<Dataset, Dataset> split_holdout(const Dataset& ds, double fraction);

// Model persistence (JSON documents with format versions).
inline constexpr int kModelFormatVersion = 1;
nlohmann::json forward_to_json(const ForwardModel& m);
ForwardModel forward_from_json(const nlohmann::json& j);
nlohmann::json inverse_to_json(const InverseModel& m);
InverseModel inverse_from_json(const nlohmann::json& j);

}  // namespace dexkit
