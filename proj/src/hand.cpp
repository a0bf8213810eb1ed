#include "dexkit/hand.hpp"

#include <algorithm>
#include <cmath>

namespace dexkit {

std::string to_string(ActuationMode m) {
    switch (m) {
        case ActuationMode::direct: return "direct";
        case ActuationMode::coupled: return "coupled";
        case ActuationMode::tendon: return "tendon";
    }
    return "direct";
}

ActuationMode actuation_mode_from_string(const std::string& s) {
    if (s == "direct") return ActuationMode::direct;
    if (s == "coupled") return ActuationMode::coupled;
    if (s == "tendon") return ActuationMode::tendon;
    throw ConfigError("unknown actuation_mode: " + s);
}

int HandConfig::dof() const {
    int n = 0;
    for (int j : joints_per_finger) n += j;
    return n;
}

int HandConfig::action_dim() const {
    switch (actuation_mode) {
        case ActuationMode::direct: return dof();
        case ActuationMode::coupled: return coupling_matrix.cols;
        case ActuationMode::tendon: return tendon_matrix.cols;
    }
    return dof();
}

void HandConfig::validate() const {
    if (num_fingers <= 0) throw ConfigError("hand: num_fingers must be positive");
    if (static_cast<int>(joints_per_finger.size()) != num_fingers)
        throw ConfigError("hand: joints_per_finger size != num_fingers");
    for (int j : joints_per_finger)
        if (j <= 0) throw ConfigError("hand: joints_per_finger entries must be positive");
    const int n = dof();
    if (static_cast<int>(link_lengths.size()) != n) throw ConfigError("hand: link_lengths size != DoF");
    for (double l : link_lengths)
        if (!(l > 0.0)) throw ConfigError("hand: link lengths must be positive");
    if (static_cast<int>(joint_lo.size()) != n || static_cast<int>(joint_hi.size()) != n)
        throw ConfigError("hand: joint limit arrays must have DoF entries");
    for (int i = 0; i < n; ++i)
        if (!(joint_lo[i] < joint_hi[i])) throw ConfigError("hand: joint limits need lo < hi");
    if (!(response_gain > 0.0 && response_gain <= 1.0))
        throw ConfigError("hand: response_gain must lie in (0,1]");
    if (skipped_frames_quasistatic < 1 || skipped_frames_sequential < 1)
        throw ConfigError("hand: skipped frame counts must be positive");
    if (!(success_threshold > 0.0)) throw ConfigError("hand: success_threshold must be positive");
    const int k = action_dim();
    switch (actuation_mode) {
        case ActuationMode::direct:
            break;
        case ActuationMode::coupled:
            if (coupling_matrix.rows != n) throw ConfigError("hand: coupling_matrix rows != DoF");
            if (!(k < n)) throw ConfigError("hand: coupled mode requires K < DoF");
            break;
        case ActuationMode::tendon:
            if (tendon_matrix.rows != n) throw ConfigError("hand: tendon_matrix rows != DoF");
            if (!(k > n)) throw ConfigError("hand: tendon mode requires K > DoF");
            break;
    }
    if (static_cast<int>(actuator_scale.size()) != k)
        throw ConfigError("hand: actuator_scale must have K entries");
    for (double s : actuator_scale)
        if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("hand: actuator_scale entries must lie in [0,1]");
    if (static_cast<int>(base_positions.size()) != num_fingers ||
        static_cast<int>(base_rotations.size()) != num_fingers)
        throw ConfigError("hand: need one base frame per finger");
}

void finger_tip(const HandConfig& config, int finger, const double* angles, double* out) {
    const int joints = config.joints_per_finger[finger];
    int offset = 0;
    for (int f = 0; f < finger; ++f) offset += config.joints_per_finger[f];
    double cum = 0.0, px = 0.0, py = 0.0;
    for (int j = 0; j < joints; ++j) {
        cum += angles[offset + j];
        px += config.link_lengths[offset + j] * std::cos(cum);
        py += config.link_lengths[offset + j] * std::sin(cum);
    }
    const Vec3 world = config.base_positions[finger] + config.base_rotations[finger] * Vec3{px, py, 0.0};
    out[0] = world.x;
    out[1] = world.y;
    out[2] = world.z;
}

Vec forward_kinematics(const HandConfig& config, const Vec& joint_angles) {
    const int n = config.dof();
    if (static_cast<int>(joint_angles.size()) != n)
        throw ShapeError("forward_kinematics: expected " + std::to_string(n) + " joint angles");
    constexpr double kLimitSlack = 1e-9;
    for (int i = 0; i < n; ++i) {
        if (!std::isfinite(joint_angles[i])) throw NumericError("forward_kinematics: non-finite angle");
        if (joint_angles[i] < config.joint_lo[i] - kLimitSlack ||
            joint_angles[i] > config.joint_hi[i] + kLimitSlack)
            throw DomainError("forward_kinematics: joint " + std::to_string(i) + " outside limits");
    }
    Vec tips(3 * config.num_fingers);
    for (int f = 0; f < config.num_fingers; ++f)
        finger_tip(config, f, joint_angles.data(), tips.data() + 3 * f);
    return tips;
}

SimState make_state(const HandConfig& config, Vec joint_angles) {
    SimState st;
    st.tips = forward_kinematics(config, joint_angles);
    st.joint_angles = std::move(joint_angles);
    return st;
}

SimState make_rest_state(const HandConfig& config) {
    Vec q(config.dof());
    for (int i = 0; i < config.dof(); ++i) q[i] = clamp(0.0, config.joint_lo[i], config.joint_hi[i]);
    return make_state(config, std::move(q));
}

SimState make_grasp_state(const HandConfig& config) {
    Vec q(config.dof());
    for (int i = 0; i < config.dof(); ++i)
        q[i] = config.joint_lo[i] + 0.45 * (config.joint_hi[i] - config.joint_lo[i]);
    return make_state(config, std::move(q));
}

SimState env_step(const HandConfig& config, const SimState& state, std::span<const double> action,
                  StepMode mode) {
    const int n = config.dof();
    const int k = config.action_dim();
    if (static_cast<int>(action.size()) != k)
        throw ShapeError("env_step: expected action of length " + std::to_string(k));
    if (static_cast<int>(state.joint_angles.size()) != n) throw ShapeError("env_step: bad state");

    Vec effective(k);
    for (int i = 0; i < k; ++i) {
        if (!std::isfinite(action[i])) throw NumericError("env_step: non-finite action component");
        effective[i] = config.actuator_scale[i] * clamp(action[i], -1.0, 1.0);
    }

    const int frames = mode == StepMode::quasi_static ? config.skipped_frames_quasistatic
                                                      : config.skipped_frames_sequential;
    Vec q = state.joint_angles;
    if (config.actuation_mode == ActuationMode::tendon) {
        // activations in [0,1] act as persistent joint velocity commands
        Vec activation(k);
        for (int i = 0; i < k; ++i) activation[i] = clamp(effective[i], 0.0, 1.0);
        Vec velocity(n);
        matvec(config.tendon_matrix, activation, velocity);
        for (int f = 0; f < frames; ++f)
            for (int i = 0; i < n; ++i)
                q[i] = clamp(q[i] + config.response_gain * velocity[i], config.joint_lo[i], config.joint_hi[i]);
    } else {
        Vec command(n);
        if (config.actuation_mode == ActuationMode::direct) {
            command = effective;
        } else {
            matvec(config.coupling_matrix, effective, command);
            for (double& c : command) c = clamp(c, -1.0, 1.0);
        }
        Vec target(n);
        for (int i = 0; i < n; ++i)
            target[i] = config.joint_lo[i] + 0.5 * (command[i] + 1.0) * (config.joint_hi[i] - config.joint_lo[i]);
        for (int f = 0; f < frames; ++f)
            for (int i = 0; i < n; ++i)
                q[i] = clamp(q[i] + config.response_gain * (target[i] - q[i]), config.joint_lo[i],
                             config.joint_hi[i]);
    }

    SimState next = make_state(config, std::move(q));
    next.frame = state.frame + frames;
    return next;
}

HandConfig apply_perturbation(const HandConfig& config, const Perturbation& p) {
    HandConfig out = config;
    switch (p.kind) {
        case Perturbation::Kind::actuator_failure:
            if (p.index < 0 || p.index >= config.action_dim())
                throw DomainError("apply_perturbation: actuator index out of range");
            out.actuator_scale[p.index] = 0.0;
            break;
        case Perturbation::Kind::fatigue:
            if (!(p.factor > 0.0 && p.factor <= 1.0))
                throw DomainError("apply_perturbation: fatigue factor must lie in (0,1]");
            for (double& s : out.actuator_scale) s *= p.factor;
            break;
    }
    return out;
}

Vec sample_reachable_target(const HandConfig& config, Rng& rng) {
    Vec q(config.dof());
    for (int i = 0; i < config.dof(); ++i) q[i] = rng.uniform(config.joint_lo[i], config.joint_hi[i]);
    return forward_kinematics(config, q);
}

Vec sample_reachable_target(const HandConfig& config, uint64_t seed) {
    Rng rng(seed);
    return sample_reachable_target(config, rng);
}

namespace {

// Opposed-thumb layout. Finger 0 is a thumb below the palm plane pointing
// back at the others and curling upward; the remaining fingers sit on an arc
// across from it, point inward with a shared yaw offset (so curling sweeps
// their tips tangentially, which is what spins a grasped object) and curl
// downward. The arc finger at 180 degrees is the designated pinch partner:
// its tip path crosses the thumb's.
void place_fingers(HandConfig& c, double arc_radius, double arc_height, double grip_offset,
                   const std::vector<double>& arc_degrees) {
    c.base_positions.clear();
    c.base_rotations.clear();

    const Vec3 up{0.0, 0.0, 1.0};
    const Vec3 down{0.0, 0.0, -1.0};
    {
        const double yaw = 0.20;  // slightly across the palm
        const Vec3 dir{-std::cos(yaw), -std::sin(yaw), 0.0};
        c.base_positions.push_back({0.065, -0.012, -0.050});
        c.base_rotations.push_back(Mat3::from_columns(dir, up, cross(dir, up)));
    }
    for (int f = 1; f < c.num_fingers; ++f) {
        const double phi = M_PI + arc_degrees[static_cast<size_t>(f - 1)] * M_PI / 180.0;
        const Vec3 base{arc_radius * std::cos(phi), arc_radius * std::sin(phi), arc_height};
        const Vec3 dir{-std::cos(phi + grip_offset), -std::sin(phi + grip_offset), 0.0};
        c.base_positions.push_back(base);
        c.base_rotations.push_back(Mat3::from_columns(dir, down, cross(dir, down)));
    }
}

Vec finger_links(int joints) {
    // distal links shorten, total length roughly 8.5-9 cm
    Vec lengths(joints);
    double l = joints <= 3 ? 0.036 : (joints == 4 ? 0.031 : 0.027);
    for (int j = 0; j < joints; ++j) {
        lengths[j] = l;
        l *= 0.78;
    }
    return lengths;
}

void fill_joints(HandConfig& c) {
    c.link_lengths.clear();
    c.joint_lo.clear();
    c.joint_hi.clear();
    for (int f = 0; f < c.num_fingers; ++f) {
        const Vec links = finger_links(c.joints_per_finger[f]);
        for (int j = 0; j < c.joints_per_finger[f]; ++j) {
            c.link_lengths.push_back(links[j]);
            c.joint_lo.push_back(j == 0 ? -0.45 : -0.20);
            c.joint_hi.push_back(j == 0 ? 1.20 : 1.50);
        }
    }
}

}  // namespace

HandConfig robotiq_like() {
    HandConfig c;
    c.name = "robotiq_like";
    c.num_fingers = 3;
    c.joints_per_finger = {4, 4, 3};  // DoF 11, fully actuated
    fill_joints(c);
    place_fingers(c, 0.075, 0.02, -0.40, {0.0, 45.0});
    c.actuation_mode = ActuationMode::direct;
    c.skipped_frames_quasistatic = 150;
    c.skipped_frames_sequential = 10;
    c.success_threshold = 0.015;
    c.actuator_scale.assign(c.action_dim(), 1.0);
    c.validate();
    return c;
}

HandConfig allegro_like() {
    HandConfig c;
    c.name = "allegro_like";
    c.num_fingers = 4;
    c.joints_per_finger = {4, 4, 4, 4};  // DoF 16, fully actuated
    fill_joints(c);
    place_fingers(c, 0.075, 0.02, -0.40, {35.0, -35.0, 0.0});
    c.actuation_mode = ActuationMode::direct;
    c.skipped_frames_quasistatic = 50;
    c.skipped_frames_sequential = 10;
    c.success_threshold = 0.015;
    c.actuator_scale.assign(c.action_dim(), 1.0);
    c.validate();
    return c;
}

HandConfig shadowhand_like() {
    HandConfig c;
    c.name = "shadowhand_like";
    c.num_fingers = 5;
    c.joints_per_finger = {4, 5, 5, 5, 5};  // DoF 24
    fill_joints(c);
    place_fingers(c, 0.075, 0.02, -0.40, {0.0, 30.0, -30.0, 60.0});
    c.actuation_mode = ActuationMode::coupled;
    // thumb fully actuated; each long finger shares one actuator across its
    // two distal joints -> K = 4 + 4*4 = 20 < 24
    c.coupling_matrix = Mat(24, 20);
    int joint = 0, act = 0;
    for (int f = 0; f < c.num_fingers; ++f) {
        const int joints = c.joints_per_finger[f];
        for (int j = 0; j < joints; ++j) {
            const bool distal_pair = f > 0 && j >= joints - 2;
            c.coupling_matrix(joint, act) = 1.0;
            ++joint;
            if (!(distal_pair && j == joints - 2)) ++act;  // hold actuator for the coupled pair
        }
    }
    c.skipped_frames_quasistatic = 200;
    c.skipped_frames_sequential = 10;
    c.success_threshold = 0.015;
    c.actuator_scale.assign(c.action_dim(), 1.0);
    c.validate();
    return c;
}

HandConfig myohand_like() {
    HandConfig c;
    c.name = "myohand_like";
    c.num_fingers = 5;
    c.joints_per_finger = {4, 5, 5, 5, 4};  // DoF 23
    fill_joints(c);
    place_fingers(c, 0.075, 0.02, -0.40, {0.0, 30.0, -30.0, 60.0});
    c.actuation_mode = ActuationMode::tendon;
    // one flexor per joint plus an extensor on the first 16 joints -> K = 39
    const int dof = c.dof();
    const int extensors = 16;
    c.tendon_matrix = Mat(dof, dof + extensors);
    const double gain = 0.75;
    for (int j = 0; j < dof; ++j) c.tendon_matrix(j, j) = gain;
    for (int j = 0; j < extensors; ++j) c.tendon_matrix(j, dof + j) = -gain;
    c.skipped_frames_quasistatic = 100;
    c.skipped_frames_sequential = 5;
    c.success_threshold = 0.0125;
    c.actuator_scale.assign(c.action_dim(), 1.0);
    c.validate();
    return c;
}

HandConfig preset_by_name(const std::string& name) {
    if (name == "robotiq_like") return robotiq_like();
    if (name == "allegro_like") return allegro_like();
    if (name == "shadowhand_like") return shadowhand_like();
    if (name == "myohand_like") return myohand_like();
    throw ConfigError("unknown hand preset: " + name);
}

std::vector<std::string> preset_names() {
    return {"robotiq_like", "allegro_like", "shadowhand_like", "myohand_like"};
}

namespace {

nlohmann::json mat_to_json(const Mat& m) {
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Mat mat_from_json(const nlohmann::json& j) {
    Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
    m.data = j.at("data").get<Vec>();
    if (m.data.size() != static_cast<size_t>(m.rows) * m.cols)
        throw ConfigError("hand config: matrix data size mismatch");
    return m;
}

}  // namespace

nlohmann::json hand_to_json(const HandConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["num_fingers"] = c.num_fingers;
    j["joints_per_finger"] = c.joints_per_finger;
    j["link_lengths"] = c.link_lengths;
    nlohmann::json limits = nlohmann::json::array();
    for (size_t i = 0; i < c.joint_lo.size(); ++i) limits.push_back({c.joint_lo[i], c.joint_hi[i]});
    j["joint_limits"] = limits;
    j["actuation_mode"] = to_string(c.actuation_mode);
    if (c.actuation_mode == ActuationMode::coupled) j["coupling_matrix"] = mat_to_json(c.coupling_matrix);
    if (c.actuation_mode == ActuationMode::tendon) j["tendon_matrix"] = mat_to_json(c.tendon_matrix);
    j["response_gain"] = c.response_gain;
    j["skipped_frames_quasistatic"] = c.skipped_frames_quasistatic;
    j["skipped_frames_sequential"] = c.skipped_frames_sequential;
    j["success_threshold"] = c.success_threshold;
    j["actuator_scale"] = c.actuator_scale;
    nlohmann::json bases = nlohmann::json::array();
    for (const Vec3& b : c.base_positions) bases.push_back({b.x, b.y, b.z});
    j["base_positions"] = bases;
    nlohmann::json rots = nlohmann::json::array();
    for (const Mat3& r : c.base_rotations) rots.push_back(std::vector<double>(r.a, r.a + 9));
    j["base_rotations"] = rots;
    return j;
}

HandConfig hand_from_json(const nlohmann::json& j) {
    HandConfig c;
    if (j.contains("preset")) c = preset_by_name(j.at("preset").get<std::string>());
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("name", c.name);
    get("num_fingers", c.num_fingers);
    get("joints_per_finger", c.joints_per_finger);
    get("link_lengths", c.link_lengths);
    if (j.contains("joint_limits")) {
        c.joint_lo.clear();
        c.joint_hi.clear();
        for (const auto& pair : j.at("joint_limits")) {
            c.joint_lo.push_back(pair.at(0).get<double>());
            c.joint_hi.push_back(pair.at(1).get<double>());
        }
    }
    if (j.contains("actuation_mode"))
        c.actuation_mode = actuation_mode_from_string(j.at("actuation_mode").get<std::string>());
    if (j.contains("coupling_matrix")) c.coupling_matrix = mat_from_json(j.at("coupling_matrix"));
    if (j.contains("tendon_matrix")) c.tendon_matrix = mat_from_json(j.at("tendon_matrix"));
    get("response_gain", c.response_gain);
    get("skipped_frames_quasistatic", c.skipped_frames_quasistatic);
    get("skipped_frames_sequential", c.skipped_frames_sequential);
    get("success_threshold", c.success_threshold);
    get("actuator_scale", c.actuator_scale);
    if (j.contains("base_positions")) {
        c.base_positions.clear();
        for (const auto& b : j.at("base_positions"))
            c.base_positions.push_back({b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>()});
    }
    if (j.contains("base_rotations")) {
        c.base_rotations.clear();
        for (const auto& r : j.at("base_rotations")) {
            Mat3 m;
            for (int i = 0; i < 9; ++i) m.a[i] = r.at(i).get<double>();
            c.base_rotations.push_back(m);
        }
    }
    if (c.actuator_scale.empty()) c.actuator_scale.assign(c.action_dim(), 1.0);
    c.validate();
    return c;
}

}  // namespace dexkit
