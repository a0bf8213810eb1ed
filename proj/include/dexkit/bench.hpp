#pragma once

#include <string>
#include <vector>

#include "dexkit/factorized.hpp"
#include "dexkit/planning.hpp"

namespace dexkit::bench {

inline constexpr const char* kVersion = "dexkit 0.1.0";

enum class PlannerKind { ours, fm_cem, fm_rs, fm_bgd };

std::string to_string(PlannerKind p);
PlannerKind planner_from_string(const std::string& s);

// Resolved experiment description; every field is echoed into result files.
struct ExperimentConfig {
    HandConfig hand;
    StepMode setting = StepMode::sequential;
    PlannerKind planner = PlannerKind::ours;
    PlanBudget budget;
    int episodes = 100;
    std::vector<uint64_t> seeds = {1, 2, 3};
    int collect_episodes = 2000;
    int collect_steps = 5;
    ForwardHyper forward_hyper;
    InverseHyper inverse_hyper;
    int mpc_max_steps = 20;
    int rs_samples = 0;  // 0 = match the CEM budget
    int bgd_batch = 8;
    int bgd_steps = 25;
    double bgd_learning_rate = 0.2;
    bool warm_start = false;  // reuse the shifted previous plan instead of re-initializing

    nlohmann::json to_json() const;
};

// Parse a config document; unset fields take setting-dependent defaults
// (quasi-static: T0=1, 5 x 400, beta 0.1; sequential: T0=3, 3 x 600,
// beta 0.2).
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);

struct MetricsRow {
    std::string hand;
    std::string planner;
    std::string setting;
    double success_rate = 0.0;      // percent
    double reach_error = 0.0;       // simulator length units
    double planning_samples = 0.0;  // per planning step
    double success_rate_ci = 0.0;   // 95% half-width over seeds
    double reach_error_ci = 0.0;
    int episodes = 0;
    int seed_count = 0;
};

struct ReachSeedOutcome {
    double success_rate = 0.0;  // percent
    double reach_error = 0.0;
    double planning_samples = 0.0;
    Vec episode_errors;
};

// Trained models of one seed, reusable across planner/budget evaluations.
struct TrainedSeed {
    ForwardModel forward;
    InverseModel inverse;
    bool has_inverse = false;
};

TrainedSeed train_seed(const ExperimentConfig& config, uint64_t seed, bool with_inverse);

PlanResult plan_with(const ExperimentConfig& config, const TrainedSeed& models,
                     const Vec& state_tips, const Vec& target, uint64_t seed);

// One episode with the configured planner: quasi-static = single
// plan-and-execute, sequential = MPC with per-step replanning.
EpisodeRecord run_reach_episode(const ExperimentConfig& config, const TrainedSeed& models,
                                uint64_t seed, int episode_index);

ReachSeedOutcome run_reach_seed(const ExperimentConfig& config, const TrainedSeed& models,
                                uint64_t seed, std::vector<EpisodeRecord>* records = nullptr);

// One JSON object per episode: final error, success, steps, samples.
std::string episode_records_to_jsonl(const std::vector<EpisodeRecord>& records,
                                     const std::string& hand, const std::string& planner,
                                     uint64_t seed);

// Full pipeline over config.seeds; one aggregated row.
MetricsRow run_reach_benchmark(const ExperimentConfig& config);

struct EpisodeLog {
    std::string hand;
    std::string planner;
    uint64_t seed = 0;
    std::vector<EpisodeRecord> records;
};

// Table-style benchmark: one row per (hand, planner), sharing the trained
// models of each (hand, seed) across planners so comparisons are matched.
// When `logs` is given, every episode record is collected for emission.
std::vector<MetricsRow> run_reach_table(const ExperimentConfig& base,
                                        const std::vector<std::string>& hands,
                                        const std::vector<PlannerKind>& planners,
                                        std::vector<EpisodeLog>* logs = nullptr);

// Model/hand binding guard for artifacts loaded from disk.
void check_model_matches(const ForwardModel& model, const HandConfig& hand);
void check_model_matches(const InverseModel& model, const HandConfig& hand);

struct AblateCell {
    std::string hand;
    int action_dim = 0;
    long data_volume = 0;
    uint64_t seed = 0;
    double holdout_mse = 0.0;
};

struct AblateDataResult {
    std::vector<AblateCell> cells;
    // least-squares slope of log holdout MSE against log data volume, per hand
    std::vector<std::pair<std::string, double>> log_slopes;
};

AblateDataResult ablate_data_dim(const std::vector<std::string>& presets,
                                 const std::vector<long>& volumes,
                                 const std::vector<uint64_t>& seeds, const ForwardHyper& hyper,
                                 StepMode mode, int steps_per_episode);

struct BudgetCell {
    int samples = 0;
    int iterations = 0;
    std::string planner;
    double mean_error = 0.0;
    double ci = 0.0;
    Vec episode_errors;
};

// Budget sweep of ours vs plain CEM with shared models and paired targets.
std::vector<BudgetCell> ablate_budget(const ExperimentConfig& base,
                                      const std::vector<std::pair<int, int>>& grid);

struct SynergyResult {
    Vec eigenvalues;          // descending
    Vec explained_variance;   // = eigenvalues
    Vec cumulative_ratio;     // cumulative sum / total variance
    Mat correlation;          // K x K Pearson matrix (0 where a dim is constant)
    bool degenerate = false;  // total variance ~ 0
};

// PCA via covariance eigendecomposition (cyclic Jacobi).
SynergyResult analyze_synergies(const std::vector<Vec>& actions);

// Eigenvalues (and optional orthonormal eigenvectors, column-major) of a
// symmetric matrix.
void jacobi_eigen(const Mat& sym, Vec& eigenvalues, Mat* eigenvectors = nullptr);

// In-hand learning-curve comparison (factorized vs monolithic).
struct InhandConfig {
    HandConfig hand;
    ObjectParams object;
    AdaptSchedule schedule;
    PlanBudget budget;
    std::vector<uint64_t> seeds = {1, 2, 3};
    // internal-model pretraining (sequential setting)
    int collect_episodes = 1500;
    int collect_steps = 8;
    ForwardHyper forward_hyper;
    std::vector<std::string> learners = {"factorized", "monolithic"};
    bool end2end = false;

    nlohmann::json to_json() const;
};

InhandConfig parse_inhand_config(const nlohmann::json& doc);

struct InhandRun {
    std::string learner;
    uint64_t seed = 0;
    std::vector<CurvePoint> curve;
    std::vector<std::pair<int, nlohmann::json>> checkpoints;
};

std::vector<InhandRun> run_inhand(const InhandConfig& config);

// Result emission: deterministic CSV/JSON with the config and version echoed.
std::string metrics_to_csv(const std::vector<MetricsRow>& rows);
std::string ablate_data_to_csv(const AblateDataResult& result);
std::string budget_cells_to_csv(const std::vector<BudgetCell>& cells);
std::string curves_to_csv(const std::vector<InhandRun>& runs);
std::string synergy_to_csv(const SynergyResult& result);
nlohmann::json result_document(const nlohmann::json& config_echo, const nlohmann::json& results);
void write_file(const std::string& path, const std::string& content);

std::string format_cell(double v);  // shortest round-trip decimal, CSV cell

}  // namespace dexkit::bench
