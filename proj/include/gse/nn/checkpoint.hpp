#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gse/config.hpp"
#include "gse/error.hpp"
#include "gse/nn/network.hpp"
#include "gse/nn/train.hpp"

namespace gse::nn {

inline constexpr const char* kCheckpointMagic = "gse-checkpoint 1";

/// Text checkpoint: magic line, `key = value` header, a `---` separator, then one
/// hexadecimal float per parameter (exact round trip).
struct Checkpoint {
    KeyValueConfig header;
    std::vector<double> params;

    void save(const std::string& path) const {
        std::ofstream f(path);
        if (!f) throw ConfigError("cannot write checkpoint: " + path);
        f << kCheckpointMagic << "\n" << header.str() << "---\n";
        char buf[40];
        for (double v : params) {
            std::snprintf(buf, sizeof buf, "%a\n", v);
            f << buf;
        }
        if (!f) throw ConfigError("error writing checkpoint: " + path);
    }

    static Checkpoint load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw ConfigError("cannot open checkpoint: " + path);
        std::string line;
        if (!std::getline(f, line) || line != kCheckpointMagic) throw FormatError("not a checkpoint file: " + path);
        std::string head;
        bool separated = false;
        while (std::getline(f, line)) {
            if (line == "---") {
                separated = true;
                break;
            }
            head += line + "\n";
        }
        if (!separated) throw FormatError("checkpoint missing parameter section: " + path);
        Checkpoint c{KeyValueConfig::parse(head), {}};
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            char* end = nullptr;
            const double v = std::strtod(line.c_str(), &end);
            if (end == line.c_str()) throw FormatError("bad parameter value in checkpoint: " + line);
            c.params.push_back(v);
        }
        const auto expected = c.header.get_int("param_count", -1);
        if (expected != static_cast<long long>(c.params.size())) {
            throw FormatError("checkpoint parameter count mismatch: " + path);
        }
        return c;
    }
};

namespace detail {

inline void put_shape(KeyValueConfig& h, const NetShape& s) {
    h.set("frame_size", static_cast<long long>(s.frame_size));
    h.set("hidden", static_cast<long long>(s.hidden));
    h.set("memory", static_cast<long long>(s.memory));
}

inline NetShape get_shape(const KeyValueConfig& h) {
    NetShape s;
    s.frame_size = static_cast<std::size_t>(h.get_int("frame_size", static_cast<long long>(s.frame_size)));
    s.hidden = static_cast<std::size_t>(h.get_int("hidden", static_cast<long long>(s.hidden)));
    s.memory = static_cast<std::size_t>(h.get_int("memory", static_cast<long long>(s.memory)));
    return s;
}

inline void put_train(KeyValueConfig& h, const TrainConfig& t) {
    h.set("train.batch_size", t.batch_size);
    h.set("train.steps", t.steps);
    h.set("train.learning_rate", t.learning_rate);
    h.set("train.optimizer", std::string(to_string(t.optimizer)));
    h.set("seed", static_cast<long long>(t.seed));
}

}  // namespace detail

[[nodiscard]] inline Checkpoint make_checkpoint(const ScoreNet& net, const TrainConfig& train) {
    Checkpoint c;
    c.header.set("role", std::string("score"));
    detail::put_shape(c.header, net.config().shape);
    c.header.set("embed_dim", static_cast<long long>(net.config().embed_dim));
    c.header.set("noise_scale", net.config().noise_scale);
    const auto sde = net.sde().to_config();
    for (const auto& [k, v] : sde.values()) c.header.set("sde." + k, v);
    detail::put_train(c.header, train);
    c.header.set("param_count", static_cast<long long>(net.params().size()));
    c.params = net.params();
    return c;
}

[[nodiscard]] inline Checkpoint make_checkpoint(const DenoiserNet& net, const TrainConfig& train) {
    Checkpoint c;
    c.header.set("role", std::string("denoiser"));
    detail::put_shape(c.header, net.config().shape);
    detail::put_train(c.header, train);
    c.header.set("param_count", static_cast<long long>(net.params().size()));
    c.params = net.params();
    return c;
}

[[nodiscard]] inline ScoreNet load_score_net(const Checkpoint& c) {
    if (c.header.get_string("role", "") != "score") throw FormatError("checkpoint is not a score network");
    ScoreNet::Config cfg;
    cfg.shape = detail::get_shape(c.header);
    cfg.embed_dim = static_cast<std::size_t>(c.header.get_int("embed_dim", 32));
    cfg.noise_scale = c.header.get_double("noise_scale", cfg.noise_scale);
    KeyValueConfig sde;
    for (const auto& [k, v] : c.header.values()) {
        if (k.rfind("sde.", 0) == 0) sde.set(k.substr(4), v);
    }
    ScoreNet net(cfg, SdeParams::from_config(sde));
    if (net.params().size() != c.params.size()) throw FormatError("score checkpoint does not match its shape");
    net.params() = c.params;
    return net;
}

[[nodiscard]] inline DenoiserNet load_denoiser_net(const Checkpoint& c) {
    if (c.header.get_string("role", "") != "denoiser") throw FormatError("checkpoint is not a denoiser network");
    DenoiserNet net(DenoiserNet::Config{detail::get_shape(c.header)});
    if (net.params().size() != c.params.size()) throw FormatError("denoiser checkpoint does not match its shape");
    net.params() = c.params;
    return net;
}

}  // namespace gse::nn
