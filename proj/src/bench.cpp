#include "dexkit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dexkit/dsl.hpp"
#include "dexkit/stats.hpp"

namespace dexkit::bench {

std::string to_string(PlannerKind p) {
    switch (p) {
        case PlannerKind::ours: return "ours";
        case PlannerKind::fm_cem: return "fm_cem";
        case PlannerKind::fm_rs: return "fm_rs";
        case PlannerKind::fm_bgd: return "fm_bgd";
    }
    return "ours";
}

PlannerKind planner_from_string(const std::string& s) {
    if (s == "ours") return PlannerKind::ours;
    if (s == "fm_cem") return PlannerKind::fm_cem;
    if (s == "fm_rs") return PlannerKind::fm_rs;
    if (s == "fm_bgd") return PlannerKind::fm_bgd;
    throw ConfigError("unknown planner: " + s);
}

std::string format_cell(double v) { return dsl::format_number(v); }

namespace {

std::string step_mode_name(StepMode m) {
    return m == StepMode::quasi_static ? "quasi_static" : "sequential";
}

StepMode step_mode_from_string(const std::string& s) {
    if (s == "quasi_static") return StepMode::quasi_static;
    if (s == "sequential") return StepMode::sequential;
    throw ConfigError("unknown setting: " + s);
}

PlanBudget default_budget(StepMode mode) {
    PlanBudget b;
    if (mode == StepMode::quasi_static) {
        b.horizon = 1;
        b.cem_iterations = 5;
        b.samples = 400;
        b.elites = 20;
        b.beta = 0.1;
    } else {
        b.horizon = 3;
        b.cem_iterations = 3;
        b.samples = 600;
        b.elites = 20;
        b.beta = 0.2;
    }
    return b;
}

nlohmann::json budget_to_json(const PlanBudget& b) {
    return {{"horizon", b.horizon},
            {"cem_iterations", b.cem_iterations},
            {"samples", b.samples},
            {"elites", b.elites},
            {"beta", b.beta}};
}

void budget_from_json(const nlohmann::json& j, PlanBudget& b) {
    if (j.contains("horizon")) b.horizon = j.at("horizon").get<int>();
    if (j.contains("cem_iterations")) b.cem_iterations = j.at("cem_iterations").get<int>();
    if (j.contains("samples")) b.samples = j.at("samples").get<int>();
    if (j.contains("elites")) b.elites = j.at("elites").get<int>();
    if (j.contains("beta")) b.beta = j.at("beta").get<double>();
}

nlohmann::json forward_hyper_to_json(const ForwardHyper& h) {
    return {{"horizon", h.horizon},     {"discount", h.discount}, {"learning_rate", h.learning_rate},
            {"final_learning_rate_fraction", h.final_learning_rate_fraction},
            {"steps", h.steps},         {"batch", h.batch},       {"hidden", h.hidden},
            {"activation", nn::to_string(h.activation)}};
}

void forward_hyper_from_json(const nlohmann::json& j, ForwardHyper& h) {
    if (j.contains("horizon")) h.horizon = j.at("horizon").get<int>();
    if (j.contains("discount")) h.discount = j.at("discount").get<double>();
    if (j.contains("learning_rate")) h.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("final_learning_rate_fraction"))
        h.final_learning_rate_fraction = j.at("final_learning_rate_fraction").get<double>();
    if (j.contains("steps")) h.steps = j.at("steps").get<int>();
    if (j.contains("batch")) h.batch = j.at("batch").get<int>();
    if (j.contains("hidden")) h.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("activation"))
        h.activation = nn::activation_from_string(j.at("activation").get<std::string>());
}

nlohmann::json inverse_hyper_to_json(const InverseHyper& h) {
    return {{"target_shift", h.target_shift}, {"learning_rate", h.learning_rate}, {"steps", h.steps},
            {"batch", h.batch},               {"hidden", h.hidden},
            {"activation", nn::to_string(h.activation)}};
}

void inverse_hyper_from_json(const nlohmann::json& j, InverseHyper& h) {
    if (j.contains("target_shift")) h.target_shift = j.at("target_shift").get<int>();
    if (j.contains("learning_rate")) h.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("steps")) h.steps = j.at("steps").get<int>();
    if (j.contains("batch")) h.batch = j.at("batch").get<int>();
    if (j.contains("hidden")) h.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("activation"))
        h.activation = nn::activation_from_string(j.at("activation").get<std::string>());
}

}  // namespace

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    j["hand"] = hand_to_json(hand);
    j["setting"] = step_mode_name(setting);
    j["planner"] = to_string(planner);
    j["budget"] = budget_to_json(budget);
    j["episodes"] = episodes;
    j["seeds"] = seeds;
    j["collect_episodes"] = collect_episodes;
    j["collect_steps"] = collect_steps;
    j["forward_hyper"] = forward_hyper_to_json(forward_hyper);
    j["inverse_hyper"] = inverse_hyper_to_json(inverse_hyper);
    j["mpc_max_steps"] = mpc_max_steps;
    j["rs_samples"] = rs_samples;
    j["bgd_batch"] = bgd_batch;
    j["bgd_steps"] = bgd_steps;
    j["bgd_learning_rate"] = bgd_learning_rate;
    j["warm_start"] = warm_start;
    return j;
}

ExperimentConfig parse_experiment_config(const nlohmann::json& doc) {
    ExperimentConfig cfg;
    if (!doc.contains("hand")) throw ConfigError("experiment config: missing 'hand'");
    cfg.hand = hand_from_json(doc.at("hand"));
    if (doc.contains("setting")) cfg.setting = step_mode_from_string(doc.at("setting").get<std::string>());
    cfg.budget = default_budget(cfg.setting);
    if (doc.contains("budget")) budget_from_json(doc.at("budget"), cfg.budget);
    if (doc.contains("planner")) cfg.planner = planner_from_string(doc.at("planner").get<std::string>());
    if (doc.contains("episodes")) cfg.episodes = doc.at("episodes").get<int>();
    if (cfg.episodes < 1) throw ConfigError("experiment config: episodes must be >= 1");
    if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<uint64_t>>();
    if (cfg.seeds.empty()) throw ConfigError("experiment config: need at least one seed");
    if (doc.contains("collect_episodes")) cfg.collect_episodes = doc.at("collect_episodes").get<int>();
    if (doc.contains("collect_steps")) cfg.collect_steps = doc.at("collect_steps").get<int>();
    cfg.forward_hyper.horizon = cfg.setting == StepMode::quasi_static ? 1 : 10;
    if (doc.contains("forward_hyper")) forward_hyper_from_json(doc.at("forward_hyper"), cfg.forward_hyper);
    if (doc.contains("inverse_hyper")) inverse_hyper_from_json(doc.at("inverse_hyper"), cfg.inverse_hyper);
    if (doc.contains("mpc_max_steps")) cfg.mpc_max_steps = doc.at("mpc_max_steps").get<int>();
    if (doc.contains("rs_samples")) cfg.rs_samples = doc.at("rs_samples").get<int>();
    if (doc.contains("bgd_batch")) cfg.bgd_batch = doc.at("bgd_batch").get<int>();
    if (doc.contains("bgd_steps")) cfg.bgd_steps = doc.at("bgd_steps").get<int>();
    if (doc.contains("bgd_learning_rate")) cfg.bgd_learning_rate = doc.at("bgd_learning_rate").get<double>();
    if (doc.contains("warm_start")) cfg.warm_start = doc.at("warm_start").get<bool>();
    cfg.budget.validate();
    return cfg;
}

TrainedSeed train_seed(const ExperimentConfig& config, uint64_t seed, bool with_inverse) {
    const Dataset ds =
        collect_random(config.hand, config.setting, config.collect_episodes, config.collect_steps, seed);
    TrainedSeed out;
    ForwardHyper fh = config.forward_hyper;
    fh.seed = seed;
    // multi-step loss needs windows; cap the horizon at the episode length
    fh.horizon = std::min(fh.horizon, config.collect_steps);
    out.forward = train_forward(ds, fh);
    if (with_inverse) {
        InverseHyper ih = config.inverse_hyper;
        ih.seed = seed;
        out.inverse = train_inverse(ds, ih);
        estimate_sigma(out.inverse, ds);
        out.has_inverse = true;
    }
    return out;
}

PlanResult plan_with(const ExperimentConfig& config, const TrainedSeed& models, const Vec& state_tips,
                     const Vec& target, uint64_t seed) {
    switch (config.planner) {
        case PlannerKind::ours:
            if (!models.has_inverse) throw StateError("plan_with: 'ours' needs a trained inverse model");
            return bidirectional_plan(models.forward, models.inverse, state_tips, target, nullptr,
                                      config.budget, seed);
        case PlannerKind::fm_cem:
            return plain_cem_plan(models.forward, state_tips, target, nullptr, config.budget, seed);
        case PlannerKind::fm_rs: {
            const int n = config.rs_samples > 0
                              ? config.rs_samples
                              : static_cast<int>(config.budget.planning_samples());
            return random_shoot(dynamics_of(models.forward), state_tips, make_reach_cost(target),
                                config.budget.horizon, n, seed);
        }
        case PlannerKind::fm_bgd: {
            Rng rng(seed);
            std::vector<Mat> inits(static_cast<size_t>(config.bgd_batch),
                                   Mat(config.budget.horizon, models.forward.action_dim));
            for (Mat& m : inits)
                for (double& x : m.data) x = rng.uniform(-1.0, 1.0);
            return gradient_plan(dynamics_of(models.forward), state_tips, inits, make_reach_cost(target),
                                 config.bgd_steps, config.bgd_learning_rate);
        }
    }
    throw ConfigError("plan_with: unknown planner");
}

EpisodeRecord run_reach_episode(const ExperimentConfig& config, const TrainedSeed& models,
                                uint64_t seed, int episode_index) {
    Rng rng(seed, 50000 + static_cast<uint64_t>(episode_index));
    const Vec target = sample_reachable_target(config.hand, rng);
    const SimState start = make_rest_state(config.hand);

    if (config.setting == StepMode::quasi_static) {
        EpisodeRecord record;
        record.states.push_back(start.tips);
        record.errors.push_back(reach_error(start.tips, target));
        const PlanResult plan = plan_with(config, models, start.tips, target, rng.next());
        record.samples_used = plan.samples_used;
        Vec action(plan.actions.row(0), plan.actions.row(0) + plan.actions.cols);
        const SimState end = env_step(config.hand, start, action, StepMode::quasi_static);
        record.actions.push_back(std::move(action));
        record.states.push_back(end.tips);
        record.errors.push_back(reach_error(end.tips, target));
        record.steps = 1;
        record.final_error = record.errors.back();
        record.success = record.final_error < config.hand.success_threshold;
        return record;
    }

    // default: re-initialize the distribution from scratch (or from the
    // inverse model) at every MPC step; warm_start reuses the previous plan
    // shifted by one step as the next CEM init
    std::shared_ptr<PlanResult> previous;
    Planner planner = [&config, &models, &target, &rng, previous](const SimState& state) mutable {
        if (!config.warm_start ||
            (config.planner != PlannerKind::ours && config.planner != PlannerKind::fm_cem)) {
            PlanResult plan = plan_with(config, models, state.tips, target, rng.next());
            return plan;
        }
        ActionDistribution init;
        if (previous == nullptr) {
            init = config.planner == PlannerKind::ours
                       ? tile_distribution(
                             inverse_distribution(models.inverse, state.tips, target),
                             config.budget.horizon)
                       : wide_distribution(config.budget.horizon, models.forward.action_dim);
        } else {
            init = wide_distribution(config.budget.horizon, models.forward.action_dim);
            for (int t = 0; t < config.budget.horizon; ++t) {
                const int src = std::min(t + 1, previous->actions.rows - 1);
                for (int k = 0; k < previous->actions.cols; ++k) {
                    init.mean(t, k) = previous->actions(src, k);
                    init.stddev(t, k) = 0.3;
                }
            }
        }
        PlanResult plan = cem_refine(dynamics_of(models.forward), init, state.tips,
                                     make_reach_cost(target), config.budget, rng.next());
        previous = std::make_shared<PlanResult>(plan);
        return plan;
    };
    // fixed-length episodes: the reach error is measured at the final settled
    // state rather than frozen at the first threshold crossing
    return mpc_rollout(config.hand, StepMode::sequential, start, target, planner, config.mpc_max_steps,
                       1, false);
}

ReachSeedOutcome run_reach_seed(const ExperimentConfig& config, const TrainedSeed& models,
                                uint64_t seed, std::vector<EpisodeRecord>* records) {
    ReachSeedOutcome out;
    long samples = 0;
    long plans = 0;
    int successes = 0;
    double error_sum = 0.0;
    for (int e = 0; e < config.episodes; ++e) {
        const EpisodeRecord record = run_reach_episode(config, models, seed, e);
        if (records != nullptr) records->push_back(record);
        out.episode_errors.push_back(record.final_error);
        error_sum += record.final_error;
        if (record.success) ++successes;
        samples += record.samples_used;
        plans += config.setting == StepMode::quasi_static ? 1 : std::max(1, record.steps);
    }
    out.success_rate = 100.0 * successes / static_cast<double>(config.episodes);
    out.reach_error = error_sum / static_cast<double>(config.episodes);
    out.planning_samples = plans > 0 ? static_cast<double>(samples) / static_cast<double>(plans) : 0.0;
    return out;
}

MetricsRow run_reach_benchmark(const ExperimentConfig& config) {
    std::vector<double> success_rates, reach_errors, plan_samples;
    for (uint64_t seed : config.seeds) {
        const TrainedSeed models = train_seed(config, seed, config.planner == PlannerKind::ours);
        const ReachSeedOutcome out = run_reach_seed(config, models, seed);
        success_rates.push_back(out.success_rate);
        reach_errors.push_back(out.reach_error);
        plan_samples.push_back(out.planning_samples);
    }
    MetricsRow row;
    row.hand = config.hand.name;
    row.planner = to_string(config.planner);
    row.setting = step_mode_name(config.setting);
    row.episodes = config.episodes;
    row.seed_count = static_cast<int>(config.seeds.size());
    row.success_rate = stats::mean(success_rates);
    row.reach_error = stats::mean(reach_errors);
    row.planning_samples = stats::mean(plan_samples);
    const double n = std::sqrt(static_cast<double>(config.seeds.size()));
    row.success_rate_ci = config.seeds.size() > 1 ? 1.96 * stats::sample_stddev(success_rates) / n : 0.0;
    row.reach_error_ci = config.seeds.size() > 1 ? 1.96 * stats::sample_stddev(reach_errors) / n : 0.0;
    return row;
}

std::vector<MetricsRow> run_reach_table(const ExperimentConfig& base,
                                        const std::vector<std::string>& hands,
                                        const std::vector<PlannerKind>& planners,
                                        std::vector<EpisodeLog>* logs) {
    if (hands.empty() || planners.empty()) throw ConfigError("run_reach_table: empty hands or planners");
    const bool needs_inverse =
        std::find(planners.begin(), planners.end(), PlannerKind::ours) != planners.end();
    std::vector<MetricsRow> rows;
    for (const std::string& hand_name : hands) {
        ExperimentConfig cfg = base;
        cfg.hand = preset_by_name(hand_name);
        std::vector<std::vector<double>> sr(planners.size()), re(planners.size()), ps(planners.size());
        for (uint64_t seed : cfg.seeds) {
            const TrainedSeed models = train_seed(cfg, seed, needs_inverse);
            for (size_t p = 0; p < planners.size(); ++p) {
                ExperimentConfig run_cfg = cfg;
                run_cfg.planner = planners[p];
                std::vector<EpisodeRecord> records;
                const ReachSeedOutcome out =
                    run_reach_seed(run_cfg, models, seed, logs != nullptr ? &records : nullptr);
                if (logs != nullptr)
                    logs->push_back({cfg.hand.name, to_string(planners[p]), seed, std::move(records)});
                sr[p].push_back(out.success_rate);
                re[p].push_back(out.reach_error);
                ps[p].push_back(out.planning_samples);
            }
        }
        for (size_t p = 0; p < planners.size(); ++p) {
            MetricsRow row;
            row.hand = cfg.hand.name;
            row.planner = to_string(planners[p]);
            row.setting = step_mode_name(cfg.setting);
            row.episodes = cfg.episodes;
            row.seed_count = static_cast<int>(cfg.seeds.size());
            row.success_rate = stats::mean(sr[p]);
            row.reach_error = stats::mean(re[p]);
            row.planning_samples = stats::mean(ps[p]);
            const double n = std::sqrt(static_cast<double>(cfg.seeds.size()));
            row.success_rate_ci = cfg.seeds.size() > 1 ? 1.96 * stats::sample_stddev(sr[p]) / n : 0.0;
            row.reach_error_ci = cfg.seeds.size() > 1 ? 1.96 * stats::sample_stddev(re[p]) / n : 0.0;
            rows.push_back(row);
        }
    }
    return rows;
}

void check_model_matches(const ForwardModel& model, const HandConfig& hand) {
    if (model.state_dim != hand.state_dim() || model.action_dim != hand.action_dim())
        throw DimensionMismatchError(
            "forward model (H=" + std::to_string(model.state_dim) + ", K=" +
            std::to_string(model.action_dim) + ") does not fit hand '" + hand.name + "' (H=" +
            std::to_string(hand.state_dim()) + ", K=" + std::to_string(hand.action_dim()) + ")");
}

void check_model_matches(const InverseModel& model, const HandConfig& hand) {
    if (model.state_dim != hand.state_dim() || model.action_dim != hand.action_dim())
        throw DimensionMismatchError(
            "inverse model (H=" + std::to_string(model.state_dim) + ", K=" +
            std::to_string(model.action_dim) + ") does not fit hand '" + hand.name + "' (H=" +
            std::to_string(hand.state_dim()) + ", K=" + std::to_string(hand.action_dim()) + ")");
}

AblateDataResult ablate_data_dim(const std::vector<std::string>& presets,
                                 const std::vector<long>& volumes,
                                 const std::vector<uint64_t>& seeds, const ForwardHyper& hyper,
                                 StepMode mode, int steps_per_episode) {
    if (presets.empty() || volumes.empty() || seeds.empty())
        throw ConfigError("ablate_data_dim: empty grid");
    AblateDataResult result;
    for (const std::string& preset : presets) {
        const HandConfig hand = preset_by_name(preset);
        std::vector<double> log_n, log_mse;
        for (long volume : volumes) {
            const int episodes = static_cast<int>((volume + steps_per_episode - 1) / steps_per_episode);
            for (uint64_t seed : seeds) {
                const Dataset ds = collect_random(hand, mode, episodes, steps_per_episode, seed);
                ForwardHyper h = hyper;
                h.seed = seed;
                h.horizon = std::min(h.horizon, steps_per_episode);
                TrainReport report;
                train_forward(ds, h, &report);
                result.cells.push_back({preset, hand.action_dim(), volume, seed, report.holdout_mse});
                log_n.push_back(std::log(static_cast<double>(volume)));
                log_mse.push_back(std::log(report.holdout_mse));
            }
        }
        result.log_slopes.emplace_back(preset, stats::slope(log_n, log_mse));
    }
    return result;
}

std::vector<BudgetCell> ablate_budget(const ExperimentConfig& base,
                                      const std::vector<std::pair<int, int>>& grid) {
    if (grid.empty()) throw ConfigError("ablate_budget: empty grid");
    std::vector<BudgetCell> cells;
    // evaluate both planners on every grid point with shared models
    for (const auto& [n_samples, n_iters] : grid) {
        for (const PlannerKind planner : {PlannerKind::ours, PlannerKind::fm_cem}) {
            BudgetCell cell;
            cell.samples = n_samples;
            cell.iterations = n_iters;
            cell.planner = to_string(planner);
            cells.push_back(cell);
        }
    }
    std::vector<std::vector<double>> per_cell_errors(cells.size());
    for (uint64_t seed : base.seeds) {
        const TrainedSeed models = train_seed(base, seed, true);
        size_t cell_index = 0;
        for (const auto& [n_samples, n_iters] : grid) {
            for (const PlannerKind planner : {PlannerKind::ours, PlannerKind::fm_cem}) {
                ExperimentConfig cfg = base;
                cfg.planner = planner;
                cfg.budget.samples = n_samples;
                cfg.budget.cem_iterations = n_iters;
                const ReachSeedOutcome out = run_reach_seed(cfg, models, seed);
                auto& errors = per_cell_errors[cell_index++];
                errors.insert(errors.end(), out.episode_errors.begin(), out.episode_errors.end());
            }
        }
    }
    for (size_t i = 0; i < cells.size(); ++i) {
        cells[i].episode_errors = per_cell_errors[i];
        cells[i].mean_error = stats::mean(per_cell_errors[i]);
        cells[i].ci = per_cell_errors[i].size() > 1
                          ? 1.96 * stats::sample_stddev(per_cell_errors[i]) /
                                std::sqrt(static_cast<double>(per_cell_errors[i].size()))
                          : 0.0;
    }
    return cells;
}

void jacobi_eigen(const Mat& sym, Vec& eigenvalues, Mat* eigenvectors) {
    if (sym.rows != sym.cols) throw ShapeError("jacobi_eigen: matrix must be square");
    const int n = sym.rows;
    Mat a = sym;
    Mat v(n, n);
    for (int i = 0; i < n; ++i) v(i, i) = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-24) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
                for (int i = 0; i < n; ++i) {
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
    }
    eigenvalues.resize(n);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) > a(y, y); });
    for (int i = 0; i < n; ++i) eigenvalues[i] = a(order[i], order[i]);
    if (eigenvectors != nullptr) {
        *eigenvectors = Mat(n, n);
        for (int c = 0; c < n; ++c)
            for (int r = 0; r < n; ++r) (*eigenvectors)(r, c) = v(r, order[c]);
    }
}

SynergyResult analyze_synergies(const std::vector<Vec>& actions) {
    if (actions.empty()) throw ConfigError("analyze_synergies: empty action log");
    const int k = static_cast<int>(actions.front().size());
    if (static_cast<int>(actions.size()) < k)
        throw ConfigError("analyze_synergies: need at least K samples");
    const double n = static_cast<double>(actions.size());

    Vec mean(k, 0.0);
    for (const Vec& a : actions) {
        if (static_cast<int>(a.size()) != k) throw ShapeError("analyze_synergies: ragged rows");
        for (int i = 0; i < k; ++i) mean[i] += a[i];
    }
    for (double& m : mean) m /= n;

    Mat cov(k, k);
    for (const Vec& a : actions)
        for (int i = 0; i < k; ++i)
            for (int j = i; j < k; ++j) cov(i, j) += (a[i] - mean[i]) * (a[j] - mean[j]);
    for (int i = 0; i < k; ++i)
        for (int j = i; j < k; ++j) {
            cov(i, j) /= (n - 1.0);
            cov(j, i) = cov(i, j);
        }

    SynergyResult result;
    jacobi_eigen(cov, result.eigenvalues);
    for (double& ev : result.eigenvalues)
        if (ev < 0.0 && ev > -1e-12) ev = 0.0;  // numerical noise on rank-deficient logs
    result.explained_variance = result.eigenvalues;

    double total = 0.0;
    for (double ev : result.eigenvalues) total += ev;
    result.cumulative_ratio.resize(k);
    if (total <= 1e-15) {
        result.degenerate = true;
        for (int i = 0; i < k; ++i) result.cumulative_ratio[i] = 1.0;
    } else {
        double cumulative = 0.0;
        for (int i = 0; i < k; ++i) {
            cumulative += result.eigenvalues[i];
            result.cumulative_ratio[i] = cumulative / total;
        }
    }

    result.correlation = Mat(k, k);
    for (int i = 0; i < k; ++i) {
        result.correlation(i, i) = 1.0;
        for (int j = i + 1; j < k; ++j) {
            const double denom = std::sqrt(cov(i, i) * cov(j, j));
            const double r = denom > 0.0 ? cov(i, j) / denom : 0.0;
            result.correlation(i, j) = r;
            result.correlation(j, i) = r;
        }
    }
    return result;
}

nlohmann::json InhandConfig::to_json() const {
    nlohmann::json j;
    j["hand"] = hand_to_json(hand);
    j["object"] = {{"center", {object.center.x, object.center.y, object.center.z}},
                   {"grasp_radius", object.grasp_radius},
                   {"rotation_gain", object.rotation_gain},
                   {"drop_patience", object.drop_patience},
                   {"size", object.size}};
    j["schedule"] = {{"iterations", schedule.iterations},
                     {"rollouts_per_iteration", schedule.rollouts_per_iteration},
                     {"episode_steps", schedule.episode_steps},
                     {"warmup_iterations", schedule.warmup_iterations},
                     {"train_steps_per_iteration", schedule.train_steps_per_iteration},
                     {"batch", schedule.batch},
                     {"learning_rate", schedule.learning_rate},
                     {"loss_horizon", schedule.loss_horizon},
                     {"loss_discount", schedule.loss_discount},
                     {"hidden", schedule.hidden},
                     {"goal_low", schedule.goal_low},
                     {"goal_high", schedule.goal_high},
                     {"start_rotation_range", schedule.start_rotation_range},
                     {"start_pose_jitter", schedule.start_pose_jitter},
                     {"object_sizes", schedule.object_sizes},
                     {"checkpoint_every", schedule.checkpoint_every}};
    j["budget"] = budget_to_json(budget);
    j["seeds"] = seeds;
    j["collect_episodes"] = collect_episodes;
    j["collect_steps"] = collect_steps;
    j["forward_hyper"] = forward_hyper_to_json(forward_hyper);
    j["learners"] = learners;
    j["end2end"] = end2end;
    return j;
}

InhandConfig parse_inhand_config(const nlohmann::json& doc) {
    InhandConfig cfg;
    if (!doc.contains("hand")) throw ConfigError("inhand config: missing 'hand'");
    cfg.hand = hand_from_json(doc.at("hand"));
    cfg.object = default_object_params(cfg.hand);
    if (doc.contains("object")) {
        const auto& o = doc.at("object");
        if (o.contains("center")) {
            cfg.object.center = {o.at("center").at(0).get<double>(), o.at("center").at(1).get<double>(),
                                 o.at("center").at(2).get<double>()};
        }
        if (o.contains("grasp_radius")) cfg.object.grasp_radius = o.at("grasp_radius").get<double>();
        if (o.contains("rotation_gain")) cfg.object.rotation_gain = o.at("rotation_gain").get<double>();
        if (o.contains("drop_patience")) cfg.object.drop_patience = o.at("drop_patience").get<int>();
        if (o.contains("size")) cfg.object.size = o.at("size").get<double>();
    }
    if (doc.contains("schedule")) {
        const auto& s = doc.at("schedule");
        auto get = [&](const char* key, auto& field) {
            if (s.contains(key)) field = s.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("iterations", cfg.schedule.iterations);
        get("rollouts_per_iteration", cfg.schedule.rollouts_per_iteration);
        get("episode_steps", cfg.schedule.episode_steps);
        get("warmup_iterations", cfg.schedule.warmup_iterations);
        get("train_steps_per_iteration", cfg.schedule.train_steps_per_iteration);
        get("batch", cfg.schedule.batch);
        get("learning_rate", cfg.schedule.learning_rate);
        get("loss_horizon", cfg.schedule.loss_horizon);
        get("loss_discount", cfg.schedule.loss_discount);
        get("hidden", cfg.schedule.hidden);
        get("goal_low", cfg.schedule.goal_low);
        get("goal_high", cfg.schedule.goal_high);
        get("start_rotation_range", cfg.schedule.start_rotation_range);
        get("start_pose_jitter", cfg.schedule.start_pose_jitter);
        get("object_sizes", cfg.schedule.object_sizes);
        get("checkpoint_every", cfg.schedule.checkpoint_every);
    }
    // manipulation-planner defaults: longer horizon, more samples
    cfg.budget.horizon = 7;
    cfg.budget.cem_iterations = 3;
    cfg.budget.samples = 1000;
    cfg.budget.elites = 20;
    cfg.budget.beta = 0.2;
    if (doc.contains("budget")) budget_from_json(doc.at("budget"), cfg.budget);
    if (doc.contains("seeds")) cfg.seeds = doc.at("seeds").get<std::vector<uint64_t>>();
    if (doc.contains("collect_episodes")) cfg.collect_episodes = doc.at("collect_episodes").get<int>();
    if (doc.contains("collect_steps")) cfg.collect_steps = doc.at("collect_steps").get<int>();
    cfg.forward_hyper.horizon = 10;
    if (doc.contains("forward_hyper")) forward_hyper_from_json(doc.at("forward_hyper"), cfg.forward_hyper);
    if (doc.contains("learners")) cfg.learners = doc.at("learners").get<std::vector<std::string>>();
    if (doc.contains("end2end")) cfg.end2end = doc.at("end2end").get<bool>();
    cfg.budget.validate();
    return cfg;
}

std::vector<InhandRun> run_inhand(const InhandConfig& config) {
    std::vector<InhandRun> runs;
    for (uint64_t seed : config.seeds) {
        // pretrain the internal model in the sequential setting
        ForwardModel internal;
        {
            const Dataset ds = collect_random(config.hand, StepMode::sequential, config.collect_episodes,
                                              config.collect_steps, seed);
            ForwardHyper fh = config.forward_hyper;
            fh.seed = seed;
            fh.horizon = std::min(fh.horizon, config.collect_steps);
            internal = train_forward(ds, fh);
        }
        const InHandEnv env = make_inhand_env(config.hand, config.object, StepMode::sequential);
        for (const std::string& learner : config.learners) {
            InhandRun run;
            run.learner = learner;
            run.seed = seed;
            AdaptResult result;
            if (learner == "factorized") {
                result = online_adapt(env, internal, config.schedule, config.budget, seed,
                                      config.end2end);
            } else if (learner == "monolithic") {
                result = monolithic_baseline(env, config.schedule, config.budget, seed, true);
            } else if (learner == "monolithic_plain") {
                result = monolithic_baseline(env, config.schedule, config.budget, seed, false);
            } else {
                throw ConfigError("run_inhand: unknown learner '" + learner + "'");
            }
            run.curve = std::move(result.curve);
            run.checkpoints = std::move(result.checkpoints);
            runs.push_back(std::move(run));
        }
    }
    return runs;
}

std::string episode_records_to_jsonl(const std::vector<EpisodeRecord>& records,
                                     const std::string& hand, const std::string& planner,
                                     uint64_t seed) {
    std::ostringstream out;
    for (size_t i = 0; i < records.size(); ++i) {
        nlohmann::json line;
        line["hand"] = hand;
        line["planner"] = planner;
        line["seed"] = seed;
        line["episode"] = i;
        line["final_error"] = records[i].final_error;
        line["success"] = records[i].success;
        line["steps"] = records[i].steps;
        line["samples_used"] = records[i].samples_used;
        out << line.dump() << '\n';
    }
    return out.str();
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << "hand,planner,setting,success_rate,success_rate_ci,reach_error,reach_error_ci,"
           "planning_samples,episodes,seeds\n";
    for (const MetricsRow& r : rows)
        out << r.hand << ',' << r.planner << ',' << r.setting << ',' << format_cell(r.success_rate)
            << ',' << format_cell(r.success_rate_ci) << ',' << format_cell(r.reach_error) << ','
            << format_cell(r.reach_error_ci) << ',' << format_cell(r.planning_samples) << ','
            << r.episodes << ',' << r.seed_count << '\n';
    return out.str();
}

std::string ablate_data_to_csv(const AblateDataResult& result) {
    std::ostringstream out;
    out << "hand,action_dim,data_volume,seed,holdout_mse,log_mse\n";
    for (const AblateCell& c : result.cells)
        out << c.hand << ',' << c.action_dim << ',' << c.data_volume << ',' << c.seed << ','
            << format_cell(c.holdout_mse) << ',' << format_cell(std::log(c.holdout_mse)) << '\n';
    out << "\nhand,log_mse_vs_log_n_slope\n";
    for (const auto& [hand, slope] : result.log_slopes)
        out << hand << ',' << format_cell(slope) << '\n';
    return out.str();
}

std::string budget_cells_to_csv(const std::vector<BudgetCell>& cells) {
    std::ostringstream out;
    out << "samples,iterations,planner,mean_reach_error,ci95,episodes\n";
    for (const BudgetCell& c : cells)
        out << c.samples << ',' << c.iterations << ',' << c.planner << ',' << format_cell(c.mean_error)
            << ',' << format_cell(c.ci) << ',' << c.episode_errors.size() << '\n';
    return out.str();
}

std::string curves_to_csv(const std::vector<InhandRun>& runs) {
    std::ostringstream out;
    out << "learner,seed,env_steps,success_rate,mean_reward\n";
    for (const InhandRun& run : runs)
        for (const CurvePoint& p : run.curve)
            out << run.learner << ',' << run.seed << ',' << p.env_steps << ','
                << format_cell(p.success_rate) << ',' << format_cell(p.mean_reward) << '\n';
    return out.str();
}

std::string synergy_to_csv(const SynergyResult& result) {
    std::ostringstream out;
    out << "component,explained_variance,cumulative_ratio\n";
    for (size_t i = 0; i < result.explained_variance.size(); ++i)
        out << i + 1 << ',' << format_cell(result.explained_variance[i]) << ','
            << format_cell(result.cumulative_ratio[i]) << '\n';
    out << "\ncorrelation_matrix\n";
    for (int i = 0; i < result.correlation.rows; ++i) {
        for (int j = 0; j < result.correlation.cols; ++j) {
            if (j > 0) out << ',';
            out << format_cell(result.correlation(i, j));
        }
        out << '\n';
    }
    return out.str();
}

nlohmann::json result_document(const nlohmann::json& config_echo, const nlohmann::json& results) {
    nlohmann::json doc;
    doc["version"] = kVersion;
    doc["config"] = config_echo;
    doc["results"] = results;
    return doc;
}

void write_file(const std::string& path, const std::string& content) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("write_file: cannot open " + path);
    out << content;
    if (!out) throw Error("write_file: write failed for " + path);
}

}  // namespace dexkit::bench
