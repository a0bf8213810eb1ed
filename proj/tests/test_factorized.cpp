#include <doctest.h>

#include <cmath>

#include "dexkit/factorized.hpp"

using namespace dexkit;

namespace {

InHandEnv small_env() {
    ObjectParams params;
    return make_inhand_env(myohand_like(), params, StepMode::sequential);
}

AdaptSchedule tiny_schedule() {
    AdaptSchedule s;
    s.iterations = 2;
    s.rollouts_per_iteration = 3;
    s.episode_steps = 4;
    s.warmup_iterations = 1;
    s.train_steps_per_iteration = 5;
    s.batch = 8;
    s.loss_horizon = 2;
    s.hidden = {16};
    return s;
}

PlanBudget tiny_budget() {
    PlanBudget b;
    b.horizon = 2;
    b.cem_iterations = 1;
    b.samples = 8;
    b.elites = 2;
    b.beta = 0.2;
    return b;
}

ForwardModel quick_internal(const HandConfig& hand, uint64_t seed) {
    const Dataset ds = collect_random(hand, StepMode::sequential, 120, 6, seed);
    ForwardHyper hyper;
    hyper.horizon = 3;
    hyper.steps = 120;
    hyper.batch = 32;
    hyper.hidden = {32};
    hyper.seed = seed;
    return train_forward(ds, hyper);
}

}  // namespace

TEST_SUITE("factorized") {

TEST_CASE("object feature encoding round-trips") {
    ObjectState obj;
    obj.z_rotation = 2.2;
    obj.x = 0.01;
    obj.y = -0.03;
    obj.dropped = true;
    const Vec f = encode_object(obj);
    CHECK(f.size() == kObjectFeatureDim);
    const ObjectState back = decode_object(f);
    CHECK(back.z_rotation == doctest::Approx(2.2));
    CHECK(back.x == doctest::Approx(0.01));
    CHECK(back.dropped);
}

TEST_CASE("an untrained zero external net predicts the output normalization means") {
    ExternalModel ext = make_external_model(9, {8}, nn::Activation::tanh_fn, 1);
    for (auto& w : ext.net.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    for (auto& b : ext.net.biases) std::fill(b.begin(), b.end(), 0.0);
    for (int i = 0; i < ext.net.output_dim(); ++i) ext.net.out_norm.mean[i] = 0.1 * i;
    Vec out;
    ext.predict(Vec(9, 0.3), Vec(kObjectFeatureDim, 0.2), out);
    for (int i = 0; i < ext.net.output_dim(); ++i) CHECK(out[i] == doctest::Approx(0.1 * i));
}

TEST_CASE("external input width is H + O for every preset, parameter count excludes K") {
    size_t shadow_params = 0, myo_params = 0;
    for (const std::string& name : preset_names()) {
        const HandConfig hand = preset_by_name(name);
        const ExternalModel ext =
            make_external_model(hand.state_dim(), {32, 32}, nn::Activation::tanh_fn, 2);
        CHECK(ext.net.input_dim() == hand.state_dim() + kObjectFeatureDim);
        // formula over (H, O, hidden) only; K never appears
        const int h = hand.state_dim() + kObjectFeatureDim;
        const size_t expected = static_cast<size_t>(h) * 32 + 32 + 32 * 32 + 32 +
                                static_cast<size_t>(32) * h + static_cast<size_t>(h);
        CHECK(ext.net.param_count() == expected);
        if (name == "shadowhand_like") shadow_params = ext.net.param_count();
        if (name == "myohand_like") myo_params = ext.net.param_count();
    }
    // same H, very different K: identical external model size
    CHECK(shadow_params == myo_params);
}

TEST_CASE("monolithic input layer exceeds the factorized width by exactly K") {
    for (const std::string& name : preset_names()) {
        const HandConfig hand = preset_by_name(name);
        const ExternalModel ext =
            make_external_model(hand.state_dim(), {16}, nn::Activation::tanh_fn, 3);
        const MonolithicModel mono = make_monolithic_model(hand.state_dim(), hand.action_dim(), {16},
                                                           nn::Activation::tanh_fn, 3);
        CHECK(mono.net.input_dim() == ext.net.input_dim() + hand.action_dim());
    }
}

TEST_CASE("reorientation reward matches hand arithmetic") {
    ReorientTask task;
    task.goal_rotation = 1.0;
    ObjectState at_goal;
    at_goal.z_rotation = 1.0;
    CHECK(reorient_reward(at_goal, task) == doctest::Approx(1.0));  // lambda_2

    ObjectState dropped_at_goal = at_goal;
    dropped_at_goal.dropped = true;
    CHECK(reorient_reward(dropped_at_goal, task) == doctest::Approx(1.0 - 5.0));

    ObjectState off;
    off.z_rotation = 1.0 + M_PI / 2.0;
    off.x = 0.1;  // position error 0.1, rotation error pi/2
    CHECK(reorient_reward(off, task) == doctest::Approx(-0.1).epsilon(1e-9));
}

TEST_CASE("reward stays within its analytic bounds") {
    Rng rng(5);
    ReorientTask task;
    double max_dist = 0.0;
    for (int i = 0; i < 500; ++i) {
        ObjectState obj;
        obj.z_rotation = rng.uniform(-4.0, 4.0);
        obj.x = rng.uniform(-0.5, 0.5);
        obj.y = rng.uniform(-0.5, 0.5);
        obj.dropped = rng.uniform01() < 0.3;
        const double dist = std::sqrt(obj.x * obj.x + obj.y * obj.y);
        max_dist = std::max(max_dist, dist);
        const double r = reorient_reward(obj, task);
        CHECK(r <= task.weight_rotation);
        CHECK(r >= -task.weight_position * max_dist - task.weight_drop - task.weight_rotation);
    }
}

TEST_CASE("task completion requires rotation, position and a held object") {
    ReorientTask task;
    task.goal_rotation = 0.5;
    ObjectState obj;
    obj.z_rotation = 0.5;
    CHECK(task.complete(obj));
    obj.dropped = true;
    CHECK(!task.complete(obj));
    obj.dropped = false;
    obj.z_rotation = 0.5 + std::acos(0.94);  // cos just below threshold
    CHECK(!task.complete(obj));
    obj.z_rotation = 0.5;
    obj.x = 0.08;  // beyond the 0.075 position threshold
    CHECK(!task.complete(obj));
}

TEST_CASE("multi-step loss with horizon 1 equals the plain single-step loss") {
    const InHandEnv env = small_env();
    AdaptSchedule sched = tiny_schedule();
    sched.iterations = 1;
    const AdaptResult run = monolithic_baseline(env, sched, tiny_budget(), 3, false);
    REQUIRE(!run.buffer.empty());

    MonolithicModel model = make_monolithic_model(env.hand.state_dim(), env.hand.action_dim(), {16},
                                                  nn::Activation::tanh_fn, 9);
    const auto starts = valid_window_starts(run.buffer, 1);
    const double multi = monolithic_multistep_loss(model, run.buffer, starts, 1, 0.95);

    std::vector<Vec> inputs, targets;
    for (size_t i : starts) {
        const Transition& t = run.buffer.transitions[i];
        Vec in(t.state.size() + t.action.size());
        std::copy(t.state.begin(), t.state.end(), in.begin());
        std::copy(t.action.begin(), t.action.end(), in.begin() + static_cast<long>(t.state.size()));
        inputs.push_back(std::move(in));
        targets.push_back(t.next_state);
    }
    const double plain = nn::net_loss(model.net, inputs, targets, nn::LossKind::squared);
    CHECK(std::fabs(multi - plain) < 1e-12);
}

TEST_CASE("factorized prediction keeps the internal model's hand prediction in free space") {
    // object far out of reach: pure hand dynamics, external model learns to
    // pass the internal prediction through
    const HandConfig hand = robotiq_like();
    const ForwardModel internal = quick_internal(hand, 7);

    ObjectParams params;
    params.center = {0.0, 0.0, 10.0};  // never contacted
    const InHandEnv env = make_inhand_env(hand, params, StepMode::sequential);

    AdaptSchedule sched;
    sched.iterations = 3;
    sched.rollouts_per_iteration = 20;
    sched.episode_steps = 6;
    sched.warmup_iterations = 3;  // random data only
    sched.train_steps_per_iteration = 400;
    sched.batch = 32;
    sched.loss_horizon = 1;
    sched.hidden = {32, 32};
    sched.goal_low = 0.4;
    sched.goal_high = 0.8;
    const AdaptResult run = online_adapt(env, internal, sched, tiny_budget(), 11);

    // compare s' of the external model against the internal shat on fresh data
    const Dataset probe = collect_random(hand, StepMode::sequential, 40, 6, 99);
    double gap = 0.0, internal_err = 0.0;
    Vec shat, combined;
    const Vec obj_feat = encode_object(env.object);
    for (const Transition& t : probe.transitions) {
        internal.predict(t.state, t.action, shat);
        run.external.predict(shat, obj_feat, combined);
        for (int d = 0; d < hand.state_dim(); ++d) {
            gap += (combined[d] - shat[d]) * (combined[d] - shat[d]);
            internal_err += (shat[d] - t.next_state[d]) * (shat[d] - t.next_state[d]);
        }
    }
    gap /= static_cast<double>(probe.size() * hand.state_dim());
    internal_err /= static_cast<double>(probe.size() * hand.state_dim());
    CHECK(gap <= 2.0 * internal_err);
}

TEST_CASE("online_adapt with zero iterations returns an untrained model and empty curve") {
    const InHandEnv env = small_env();
    const ForwardModel internal = quick_internal(env.hand, 5);
    AdaptSchedule sched = tiny_schedule();
    sched.iterations = 0;
    const AdaptResult run = online_adapt(env, internal, sched, tiny_budget(), 1);
    CHECK(run.curve.empty());
    CHECK(run.buffer.empty());
    CHECK(nn::nets_equal(run.internal.net, internal.net));
}

TEST_CASE("frozen internal model is bit-identical after online adaptation") {
    const InHandEnv env = small_env();
    const ForwardModel internal = quick_internal(env.hand, 6);
    const AdaptResult run = online_adapt(env, internal, tiny_schedule(), tiny_budget(), 2, false);
    CHECK(nn::nets_equal(run.internal.net, internal.net));
    CHECK_NOTHROW(run.buffer.validate());
}

TEST_CASE("end2end variant modifies the internal model") {
    const InHandEnv env = small_env();
    const ForwardModel internal = quick_internal(env.hand, 6);
    AdaptSchedule sched = tiny_schedule();
    sched.warmup_iterations = 2;  // both iterations collect random data, then train
    const AdaptResult run = online_adapt(env, internal, sched, tiny_budget(), 2, true);
    CHECK(!nn::nets_equal(run.internal.net, internal.net));
}

TEST_CASE("goal at the start orientation succeeds from iteration zero") {
    const InHandEnv env = small_env();
    const ForwardModel internal = quick_internal(env.hand, 8);
    AdaptSchedule sched = tiny_schedule();
    sched.goal_low = 0.0;
    sched.goal_high = 0.0;  // goal == start rotation
    const AdaptResult run = online_adapt(env, internal, sched, tiny_budget(), 4);
    for (const CurvePoint& p : run.curve) CHECK(p.success_rate == doctest::Approx(1.0));
    // the same holds for both monolithic baselines (monotone trivially)
    for (bool msl : {true, false}) {
        const AdaptResult mono = monolithic_baseline(env, sched, tiny_budget(), 4, msl);
        for (const CurvePoint& p : mono.curve) CHECK(p.success_rate == doctest::Approx(1.0));
    }
}

TEST_CASE("multi-object sizes keep runs deterministic") {
    const InHandEnv env = small_env();
    const ForwardModel internal = quick_internal(env.hand, 9);
    AdaptSchedule sched = tiny_schedule();
    sched.object_sizes = {0.8, 1.0, 1.2};
    const AdaptResult a = online_adapt(env, internal, sched, tiny_budget(), 12);
    const AdaptResult b = online_adapt(env, internal, sched, tiny_budget(), 12);
    REQUIRE(a.curve.size() == b.curve.size());
    for (size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].env_steps == b.curve[i].env_steps);
        CHECK(a.curve[i].success_rate == b.curve[i].success_rate);
        CHECK(a.curve[i].mean_reward == b.curve[i].mean_reward);
    }
    CHECK(nn::nets_equal(a.external.net, b.external.net));
}

TEST_CASE("external and monolithic model documents round-trip") {
    const ExternalModel ext = make_external_model(15, {24}, nn::Activation::tanh_fn, 31);
    const ExternalModel ext2 = external_from_json(external_to_json(ext));
    CHECK(nn::nets_equal(ext.net, ext2.net));
    const MonolithicModel mono = make_monolithic_model(15, 39, {24}, nn::Activation::relu, 3);
    const MonolithicModel mono2 = monolithic_from_json(monolithic_to_json(mono));
    CHECK(nn::nets_equal(mono.net, mono2.net));
    CHECK_THROWS_AS(external_from_json(monolithic_to_json(mono)), CorruptFileError);
}

TEST_CASE("env_steps_to_reach scans the curve") {
    std::vector<CurvePoint> curve{{100, 0.2, 0.0}, {200, 0.7, 0.0}, {300, 0.9, 0.0}};
    CHECK(env_steps_to_reach(curve, 0.6, -1) == 200);
    CHECK(env_steps_to_reach(curve, 0.95, -1) == -1);
}

}  // TEST_SUITE
