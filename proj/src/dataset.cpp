#include "dexkit/dataset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

namespace dexkit {

std::vector<std::pair<size_t, size_t>> Dataset::episode_ranges() const {
    std::vector<std::pair<size_t, size_t>> ranges;
    size_t begin = 0;
    for (size_t i = 1; i <= transitions.size(); ++i) {
        const bool boundary = i == transitions.size() ||
                              transitions[i].episode != transitions[begin].episode ||
                              transitions[i].step != transitions[i - 1].step + 1;
        if (boundary) {
            ranges.emplace_back(begin, i);
            begin = i;
        }
    }
    return ranges;
}

void Dataset::validate() const {
    for (size_t i = 0; i < transitions.size(); ++i) {
        const Transition& t = transitions[i];
        if (static_cast<int>(t.state.size()) != state_dim ||
            static_cast<int>(t.next_state.size()) != state_dim ||
            static_cast<int>(t.action.size()) != action_dim)
            throw ShapeError("dataset: transition " + std::to_string(i) + " has wrong dimensions");
        if (!all_finite(t.state) || !all_finite(t.action) || !all_finite(t.next_state))
            throw NumericError("dataset: transition " + std::to_string(i) + " has non-finite entries");
        if (i > 0 && transitions[i].episode == transitions[i - 1].episode &&
            transitions[i].step == transitions[i - 1].step + 1 &&
            transitions[i].state != transitions[i - 1].next_state)
            throw ShapeError("dataset: broken state chaining at transition " + std::to_string(i));
    }
}

Dataset collect_random(const HandConfig& config, StepMode mode, int episodes, int steps_per_episode,
                       uint64_t seed) {
    if (episodes < 0 || (episodes > 0 && steps_per_episode < 1))
        throw ConfigError("collect_random: need steps_per_episode >= 1");
    Dataset ds;
    ds.state_dim = config.state_dim();
    ds.action_dim = config.action_dim();
    ds.hand_name = config.name;
    ds.seed = seed;
    ds.transitions.reserve(static_cast<size_t>(episodes) * steps_per_episode);
    const int k = config.action_dim();
    for (int e = 0; e < episodes; ++e) {
        Rng rng(seed, static_cast<uint64_t>(e));
        SimState state = make_rest_state(config);
        for (int t = 0; t < steps_per_episode; ++t) {
            Transition tr;
            tr.episode = e;
            tr.step = t;
            tr.state = state.tips;
            tr.action.resize(k);
            for (int i = 0; i < k; ++i) tr.action[i] = rng.uniform(-1.0, 1.0);
            state = env_step(config, state, tr.action, mode);
            tr.next_state = state.tips;
            ds.transitions.push_back(std::move(tr));
        }
    }
    return ds;
}

namespace {

constexpr char kMagic[4] = {'D', 'X', 'D', 'S'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CorruptFileError("dataset file: truncated");
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("save_dataset: cannot open " + path);
    out.write(kMagic, 4);
    write_pod(out, kDatasetFormatVersion);
    write_pod(out, static_cast<uint32_t>(ds.state_dim));
    write_pod(out, static_cast<uint32_t>(ds.action_dim));
    write_pod(out, ds.seed);
    write_pod(out, static_cast<uint32_t>(ds.hand_name.size()));
    out.write(ds.hand_name.data(), static_cast<std::streamsize>(ds.hand_name.size()));
    write_pod(out, static_cast<uint64_t>(ds.transitions.size()));
    for (const Transition& t : ds.transitions) {
        write_pod(out, static_cast<int32_t>(t.episode));
        write_pod(out, static_cast<int32_t>(t.step));
        out.write(reinterpret_cast<const char*>(t.state.data()),
                  static_cast<std::streamsize>(t.state.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(t.action.data()),
                  static_cast<std::streamsize>(t.action.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(t.next_state.data()),
                  static_cast<std::streamsize>(t.next_state.size() * sizeof(double)));
    }
    if (!out) throw Error("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_dataset: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw CorruptFileError("dataset file: bad magic in " + path);
    uint32_t version = 0;
    read_pod(in, version);
    if (version != kDatasetFormatVersion)
        throw VersionMismatchError("dataset file: unsupported version " + std::to_string(version));
    Dataset ds;
    uint32_t h = 0, k = 0, name_len = 0;
    read_pod(in, h);
    read_pod(in, k);
    read_pod(in, ds.seed);
    read_pod(in, name_len);
    ds.state_dim = static_cast<int>(h);
    ds.action_dim = static_cast<int>(k);
    ds.hand_name.resize(name_len);
    in.read(ds.hand_name.data(), name_len);
    if (!in) throw CorruptFileError("dataset file: truncated header in " + path);
    uint64_t count = 0;
    read_pod(in, count);
    ds.transitions.resize(count);
    for (Transition& t : ds.transitions) {
        int32_t episode = 0, step = 0;
        read_pod(in, episode);
        read_pod(in, step);
        t.episode = episode;
        t.step = step;
        t.state.resize(h);
        t.action.resize(k);
        t.next_state.resize(h);
        in.read(reinterpret_cast<char*>(t.state.data()), static_cast<std::streamsize>(h * sizeof(double)));
        in.read(reinterpret_cast<char*>(t.action.data()), static_cast<std::streamsize>(k * sizeof(double)));
        in.read(reinterpret_cast<char*>(t.next_state.data()),
                static_cast<std::streamsize>(h * sizeof(double)));
        if (!in) throw CorruptFileError("dataset file: truncated transitions in " + path);
    }
    return ds;
}

}  // namespace dexkit
