#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dexkit/bench.hpp"
#include "dexkit/gesture.hpp"

using nlohmann::json;
using namespace dexkit;

namespace {

json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
}

json load_document(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw CorruptFileError("file " + path + " is not valid JSON: " + e.what());
    }
}

std::vector<uint64_t> resolve_seeds(const json& cfg, std::optional<uint64_t> cli_seed,
                                    std::vector<uint64_t> fallback) {
    if (cli_seed.has_value()) return {*cli_seed};
    if (cfg.contains("seeds")) return cfg.at("seeds").get<std::vector<uint64_t>>();
    if (cfg.contains("seed")) return {cfg.at("seed").get<uint64_t>()};
    return fallback;
}

StepMode setting_of(const json& cfg) {
    const std::string s = cfg.value("setting", std::string("sequential"));
    if (s == "quasi_static") return StepMode::quasi_static;
    if (s == "sequential") return StepMode::sequential;
    throw ConfigError("unknown setting: " + s);
}

std::string jsonl_of_dataset(const Dataset& ds) {
    std::ostringstream out;
    for (const Transition& t : ds.transitions) {
        json line;
        line["episode"] = t.episode;
        line["step"] = t.step;
        line["state"] = t.state;
        line["action"] = t.action;
        line["next_state"] = t.next_state;
        out << line.dump() << '\n';
    }
    return out.str();
}

void write_result(const std::string& out_dir, const std::string& name, const json& config_echo,
                  const json& results) {
    bench::write_file(out_dir + "/" + name,
                      bench::result_document(config_echo, results).dump(2) + "\n");
}

ForwardModel load_forward(const std::string& path, const HandConfig& hand) {
    ForwardModel fm = forward_from_json(load_document(path));
    bench::check_model_matches(fm, hand);
    return fm;
}

InverseModel load_inverse(const std::string& path, const HandConfig& hand) {
    InverseModel im = inverse_from_json(load_document(path));
    bench::check_model_matches(im, hand);
    return im;
}

int cmd_explore(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    const HandConfig hand = hand_from_json(cfg.at("hand"));
    const StepMode mode = setting_of(cfg);
    const int episodes = cfg.value("episodes", 100);
    const int steps = cfg.value("steps_per_episode", 5);
    const uint64_t seed = seeds.front();
    const Dataset ds = collect_random(hand, mode, episodes, steps, seed);
    save_dataset(ds, out_dir + "/dataset.bin");
    bench::write_file(out_dir + "/episodes.jsonl", jsonl_of_dataset(ds));
    json results;
    results["transitions"] = ds.size();
    results["state_dim"] = ds.state_dim;
    results["action_dim"] = ds.action_dim;
    results["dataset"] = "dataset.bin";
    json echo = cfg;
    echo["seed"] = seed;
    write_result(out_dir, "explore.json", echo, results);
    std::cout << "collected " << ds.size() << " transitions (H=" << ds.state_dim
              << ", K=" << ds.action_dim << ") -> " << out_dir << "/dataset.bin\n";
    return 0;
}

Dataset dataset_for_training(const json& cfg, uint64_t seed, const HandConfig& hand, StepMode mode) {
    if (cfg.contains("dataset")) return load_dataset(cfg.at("dataset").get<std::string>());
    const int episodes = cfg.value("collect_episodes", 2000);
    const int steps = cfg.value("collect_steps", 5);
    return collect_random(hand, mode, episodes, steps, seed);
}

int cmd_train_forward(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    const HandConfig hand = hand_from_json(cfg.at("hand"));
    const StepMode mode = setting_of(cfg);
    const uint64_t seed = seeds.front();
    const Dataset ds = dataset_for_training(cfg, seed, hand, mode);
    if (ds.state_dim != hand.state_dim() || ds.action_dim != hand.action_dim())
        throw DimensionMismatchError("dataset (H=" + std::to_string(ds.state_dim) + ", K=" +
                                     std::to_string(ds.action_dim) + ") does not fit hand '" +
                                     hand.name + "'");
    ForwardHyper hyper;
    hyper.horizon = mode == StepMode::quasi_static ? 1 : 10;
    if (cfg.contains("forward_hyper")) {
        const auto& h = cfg.at("forward_hyper");
        if (h.contains("horizon")) hyper.horizon = h.at("horizon").get<int>();
        if (h.contains("discount")) hyper.discount = h.at("discount").get<double>();
        if (h.contains("learning_rate")) hyper.learning_rate = h.at("learning_rate").get<double>();
        if (h.contains("steps")) hyper.steps = h.at("steps").get<int>();
        if (h.contains("batch")) hyper.batch = h.at("batch").get<int>();
        if (h.contains("hidden")) hyper.hidden = h.at("hidden").get<std::vector<int>>();
    }
    hyper.seed = seed;
    TrainReport report;
    const ForwardModel fm = train_forward(ds, hyper, &report);
    bench::write_file(out_dir + "/forward_model.json", forward_to_json(fm).dump(2) + "\n");
    json results;
    results["holdout_mse"] = report.holdout_mse;
    results["final_loss"] = report.final_loss;
    results["model"] = "forward_model.json";
    json echo = cfg;
    echo["seed"] = seed;
    write_result(out_dir, "train_forward.json", echo, results);
    std::cout << "forward model trained, holdout mse " << report.holdout_mse << " -> " << out_dir
              << "/forward_model.json\n";
    return 0;
}

int cmd_train_inverse(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    const HandConfig hand = hand_from_json(cfg.at("hand"));
    const StepMode mode = setting_of(cfg);
    const uint64_t seed = seeds.front();
    const Dataset ds = dataset_for_training(cfg, seed, hand, mode);
    InverseHyper hyper;
    if (cfg.contains("inverse_hyper")) {
        const auto& h = cfg.at("inverse_hyper");
        if (h.contains("target_shift")) hyper.target_shift = h.at("target_shift").get<int>();
        if (h.contains("learning_rate")) hyper.learning_rate = h.at("learning_rate").get<double>();
        if (h.contains("steps")) hyper.steps = h.at("steps").get<int>();
        if (h.contains("batch")) hyper.batch = h.at("batch").get<int>();
        if (h.contains("hidden")) hyper.hidden = h.at("hidden").get<std::vector<int>>();
    }
    hyper.seed = seed;
    TrainReport report;
    InverseModel im = train_inverse(ds, hyper, &report);
    estimate_sigma(im, ds);
    bench::write_file(out_dir + "/inverse_model.json", inverse_to_json(im).dump(2) + "\n");
    json results;
    results["holdout_mae"] = report.holdout_mse;
    results["sigma"] = im.sigma;
    results["model"] = "inverse_model.json";
    json echo = cfg;
    echo["seed"] = seed;
    write_result(out_dir, "train_inverse.json", echo, results);
    std::cout << "inverse model trained -> " << out_dir << "/inverse_model.json\n";
    return 0;
}

int cmd_plan(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    bench::ExperimentConfig config = bench::parse_experiment_config(cfg);
    config.seeds = seeds;
    const uint64_t seed = seeds.front();

    bench::TrainedSeed models;
    if (cfg.contains("forward_model")) {
        models.forward = load_forward(cfg.at("forward_model").get<std::string>(), config.hand);
        if (cfg.contains("inverse_model")) {
            models.inverse = load_inverse(cfg.at("inverse_model").get<std::string>(), config.hand);
            models.has_inverse = true;
        }
    } else {
        models = bench::train_seed(config, seed, config.planner == bench::PlannerKind::ours);
    }

    const EpisodeRecord record = bench::run_reach_episode(config, models, seed, 0);
    bench::write_file(out_dir + "/episodes.jsonl",
                      bench::episode_records_to_jsonl({record}, config.hand.name,
                                                      bench::to_string(config.planner), seed));
    json results;
    results["final_error"] = record.final_error;
    results["success"] = record.success;
    results["steps"] = record.steps;
    results["samples_used"] = record.samples_used;
    results["errors"] = record.errors;
    results["actions"] = record.actions;
    write_result(out_dir, "plan.json", config.to_json(), results);
    std::cout << "planned episode: final error " << record.final_error
              << (record.success ? " (success)" : " (miss)") << ", samples " << record.samples_used
              << "\n";
    return 0;
}

int cmd_bench_reach(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    bench::ExperimentConfig base = bench::parse_experiment_config(cfg);
    base.seeds = seeds;
    std::vector<std::string> hands = cfg.contains("hands")
                                         ? cfg.at("hands").get<std::vector<std::string>>()
                                         : std::vector<std::string>{base.hand.name};
    std::vector<bench::PlannerKind> planners;
    if (cfg.contains("planners"))
        for (const auto& p : cfg.at("planners"))
            planners.push_back(bench::planner_from_string(p.get<std::string>()));
    else
        planners.push_back(base.planner);

    std::vector<bench::EpisodeLog> logs;
    const auto rows = bench::run_reach_table(base, hands, planners, &logs);
    bench::write_file(out_dir + "/bench_reach.csv", bench::metrics_to_csv(rows));
    std::string jsonl;
    for (const auto& log : logs)
        jsonl += bench::episode_records_to_jsonl(log.records, log.hand, log.planner, log.seed);
    bench::write_file(out_dir + "/episodes.jsonl", jsonl);
    json results = json::array();
    for (const auto& r : rows)
        results.push_back(json{{"hand", r.hand},
                           {"planner", r.planner},
                           {"setting", r.setting},
                           {"success_rate", r.success_rate},
                           {"success_rate_ci", r.success_rate_ci},
                           {"reach_error", r.reach_error},
                           {"reach_error_ci", r.reach_error_ci},
                           {"planning_samples", r.planning_samples},
                           {"episodes", r.episodes},
                           {"seeds", r.seed_count}});
    json echo = base.to_json();
    echo["hands"] = hands;
    write_result(out_dir, "bench_reach.json", echo, results);
    std::cout << bench::metrics_to_csv(rows);
    return 0;
}

int cmd_bench_inhand(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    bench::InhandConfig config = bench::parse_inhand_config(cfg);
    config.seeds = seeds;
    const auto runs = bench::run_inhand(config);
    for (const auto& run : runs)
        for (const auto& [iteration, doc] : run.checkpoints)
            bench::write_file(out_dir + "/checkpoint_" + run.learner + "_seed" +
                                  std::to_string(run.seed) + "_iter" + std::to_string(iteration) +
                                  ".json",
                              doc.dump(2) + "\n");
    bench::write_file(out_dir + "/inhand_curves.csv", bench::curves_to_csv(runs));
    json results = json::array();
    for (const auto& run : runs) {
        json r;
        r["learner"] = run.learner;
        r["seed"] = run.seed;
        r["steps_to_60pct"] = env_steps_to_reach(run.curve, 0.60, -1);
        json points = json::array();
        for (const auto& p : run.curve)
            points.push_back(json{{"env_steps", p.env_steps},
                              {"success_rate", p.success_rate},
                              {"mean_reward", p.mean_reward}});
        r["curve"] = points;
        results.push_back(r);
    }
    write_result(out_dir, "bench_inhand.json", config.to_json(), results);
    std::cout << "in-hand curves written to " << out_dir << "/inhand_curves.csv\n";
    return 0;
}

int cmd_ablate_data(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    const auto presets = cfg.value("hands", preset_names());
    std::vector<long> volumes;
    for (const auto& v : cfg.value("volumes", std::vector<long>{2500, 5000, 10000, 20000, 40000}))
        volumes.push_back(v);
    ForwardHyper hyper;
    hyper.horizon = 1;
    if (cfg.contains("forward_hyper")) {
        const auto& h = cfg.at("forward_hyper");
        if (h.contains("steps")) hyper.steps = h.at("steps").get<int>();
        if (h.contains("batch")) hyper.batch = h.at("batch").get<int>();
        if (h.contains("hidden")) hyper.hidden = h.at("hidden").get<std::vector<int>>();
        if (h.contains("horizon")) hyper.horizon = h.at("horizon").get<int>();
        if (h.contains("learning_rate")) hyper.learning_rate = h.at("learning_rate").get<double>();
    }
    const int steps_per_episode = cfg.value("steps_per_episode", 5);
    const StepMode mode = setting_of(cfg);
    const auto result = bench::ablate_data_dim(presets, volumes, seeds, hyper, mode, steps_per_episode);
    bench::write_file(out_dir + "/ablate_data.csv", bench::ablate_data_to_csv(result));
    json rows = json::array();
    for (const auto& c : result.cells)
        rows.push_back(json{{"hand", c.hand},
                        {"action_dim", c.action_dim},
                        {"data_volume", c.data_volume},
                        {"seed", c.seed},
                        {"holdout_mse", c.holdout_mse}});
    json slopes = json::object();
    for (const auto& [hand, slope] : result.log_slopes) slopes[hand] = slope;
    json echo = cfg;
    echo["seeds"] = seeds;
    write_result(out_dir, "ablate_data.json", echo, {{"cells", rows}, {"log_slopes", slopes}});
    std::cout << "data/dimension ablation written to " << out_dir << "/ablate_data.csv\n";
    return 0;
}

int cmd_ablate_budget(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    bench::ExperimentConfig base = bench::parse_experiment_config(cfg);
    base.seeds = seeds;
    std::vector<std::pair<int, int>> grid;
    if (cfg.contains("grid"))
        for (const auto& cell : cfg.at("grid"))
            grid.emplace_back(cell.at(0).get<int>(), cell.at(1).get<int>());
    else
        grid = {{100, 2}, {200, 3}, {400, 3}, {600, 5}};
    const auto cells = bench::ablate_budget(base, grid);
    bench::write_file(out_dir + "/ablate_budget.csv", bench::budget_cells_to_csv(cells));
    json rows = json::array();
    for (const auto& c : cells)
        rows.push_back(json{{"samples", c.samples},
                        {"iterations", c.iterations},
                        {"planner", c.planner},
                        {"mean_reach_error", c.mean_error},
                        {"ci95", c.ci}});
    write_result(out_dir, "ablate_budget.json", base.to_json(), rows);
    std::cout << "budget ablation written to " << out_dir << "/ablate_budget.csv\n";
    return 0;
}

int cmd_gesture(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    const HandConfig hand = hand_from_json(cfg.at("hand"));
    const uint64_t seed = seeds.front();

    // quasi-static models: loaded or trained on the spot
    json model_cfg = cfg;
    model_cfg["setting"] = "quasi_static";
    if (!model_cfg.contains("collect_steps")) model_cfg["collect_steps"] = 3;
    bench::ExperimentConfig exp_cfg = bench::parse_experiment_config(model_cfg);
    exp_cfg.forward_hyper.horizon = 1;
    bench::TrainedSeed models;
    if (cfg.contains("forward_model") && cfg.contains("inverse_model")) {
        models.forward = load_forward(cfg.at("forward_model").get<std::string>(), hand);
        models.inverse = load_inverse(cfg.at("inverse_model").get<std::string>(), hand);
        models.has_inverse = true;
    } else {
        models = bench::train_seed(exp_cfg, seed, true);
    }
    if (!models.inverse.has_sigma()) throw StateError("gesture: inverse model has no sigma");

    dsl::CostProgram program;
    std::string request = cfg.value("request", std::string());
    if (cfg.contains("program")) {
        program = dsl::parse_cost(cfg.at("program").get<std::string>(), hand.num_fingers);
        program.finger_roles = gesture::gesture_info(hand).roles;
    } else if (!request.empty()) {
        llm::LlmClientConfig client;
        if (cfg.contains("llm")) {
            const auto& l = cfg.at("llm");
            client.endpoint_url = l.value("endpoint_url", client.endpoint_url);
            client.model = l.value("model", client.model);
            client.api_key_env = l.value("api_key_env", client.api_key_env);
            client.timeout_seconds = l.value("timeout_seconds", client.timeout_seconds);
            client.offline = l.value("offline", true);
            client.canned_dir = l.value("canned_dir", std::string());
        }
        std::unique_ptr<llm::ChatTransport> transport;
        if (client.offline)
            transport = std::make_unique<llm::CannedTransport>(gesture::default_canned_replies(hand),
                                                               client.canned_dir);
        const auto exemplars = gesture::default_exemplars(hand);
        program = llm::llm_generate_cost(request, exemplars, client, hand.num_fingers,
                                         gesture::gesture_info(hand).roles, transport.get());
    } else {
        throw ConfigError("gesture: config needs either 'program' or 'request'");
    }

    PlanBudget budget;
    budget.horizon = 1;
    budget.cem_iterations = 5;
    budget.samples = 400;
    budget.elites = 20;
    budget.beta = 0.1;
    if (cfg.contains("budget")) {
        const auto& b = cfg.at("budget");
        if (b.contains("horizon")) budget.horizon = b.at("horizon").get<int>();
        if (b.contains("cem_iterations")) budget.cem_iterations = b.at("cem_iterations").get<int>();
        if (b.contains("samples")) budget.samples = b.at("samples").get<int>();
        if (b.contains("elites")) budget.elites = b.at("elites").get<int>();
        if (b.contains("beta")) budget.beta = b.at("beta").get<double>();
    }

    const gesture::GestureResult result =
        gesture::generate_gesture(hand, models.forward, models.inverse, program, budget, seed);
    json results;
    results["request"] = request;
    results["program"] = dsl::print_program(program);
    results["action"] = result.action;
    results["fingertips"] = result.achieved_tips;
    results["cost"] = result.achieved_cost;
    results["predicted_cost"] = result.predicted_cost;
    results["samples_used"] = result.samples_used;
    json echo = cfg;
    echo["seed"] = seed;
    write_result(out_dir, "gesture.json", echo, results);
    std::cout << "gesture '" << (request.empty() ? "program" : request) << "': cost "
              << result.achieved_cost << " -> " << out_dir << "/gesture.json\n";
    return 0;
}

int cmd_synergy(const json& cfg, const std::vector<uint64_t>& seeds, const std::string& out_dir) {
    std::vector<Vec> actions;
    if (cfg.contains("dataset")) {
        const Dataset ds = load_dataset(cfg.at("dataset").get<std::string>());
        for (const Transition& t : ds.transitions) actions.push_back(t.action);
    } else if (cfg.contains("hand")) {
        const HandConfig hand = hand_from_json(cfg.at("hand"));
        const Dataset ds = collect_random(hand, setting_of(cfg), cfg.value("episodes", 200),
                                          cfg.value("steps_per_episode", 5), seeds.front());
        for (const Transition& t : ds.transitions) actions.push_back(t.action);
    } else {
        throw ConfigError("synergy: config needs 'dataset' or 'hand'");
    }
    const bench::SynergyResult result = bench::analyze_synergies(actions);
    bench::write_file(out_dir + "/synergy.csv", bench::synergy_to_csv(result));
    json results;
    results["explained_variance"] = result.explained_variance;
    results["cumulative_ratio"] = result.cumulative_ratio;
    results["degenerate"] = result.degenerate;
    json echo = cfg;
    echo["seeds"] = seeds;
    write_result(out_dir, "synergy.json", echo, results);
    std::cout << "synergy analysis written to " << out_dir << "/synergy.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dexkit: learned hand models, bidirectional planning and benchmarks"};
    app.set_version_flag("--version", std::string(bench::kVersion));
    app.require_subcommand(1);

    std::string config_path, out_dir = "out";
    std::optional<uint64_t> cli_seed;

    const std::vector<std::string> names = {"explore",      "train-forward", "train-inverse",
                                            "plan",         "bench-reach",   "bench-inhand",
                                            "ablate-data",  "ablate-budget", "gesture",
                                            "synergy"};
    std::map<std::string, CLI::App*> subs;
    for (const std::string& name : names) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--seed", cli_seed, "override the config seed(s)");
        sub->add_option("--out", out_dir, "output directory");
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        const json cfg = load_config(config_path);
        const std::vector<uint64_t> seeds = resolve_seeds(cfg, cli_seed, {1, 2, 3});
        if (subs["explore"]->parsed()) return cmd_explore(cfg, seeds, out_dir);
        if (subs["train-forward"]->parsed()) return cmd_train_forward(cfg, seeds, out_dir);
        if (subs["train-inverse"]->parsed()) return cmd_train_inverse(cfg, seeds, out_dir);
        if (subs["plan"]->parsed()) return cmd_plan(cfg, seeds, out_dir);
        if (subs["bench-reach"]->parsed()) return cmd_bench_reach(cfg, seeds, out_dir);
        if (subs["bench-inhand"]->parsed()) return cmd_bench_inhand(cfg, seeds, out_dir);
        if (subs["ablate-data"]->parsed()) return cmd_ablate_data(cfg, seeds, out_dir);
        if (subs["ablate-budget"]->parsed()) return cmd_ablate_budget(cfg, seeds, out_dir);
        if (subs["gesture"]->parsed()) return cmd_gesture(cfg, seeds, out_dir);
        if (subs["synergy"]->parsed()) return cmd_synergy(cfg, seeds, out_dir);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
