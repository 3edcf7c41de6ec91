#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "gse/gse.hpp"

#ifndef GSE_VERSION
#define GSE_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using gse::KeyValueConfig;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

KeyValueConfig with_prefix(const KeyValueConfig& c, const std::string& prefix) {
    KeyValueConfig out;
    for (const auto& [k, v] : c.values()) {
        if (k.rfind(prefix, 0) == 0) out.set(k.substr(prefix.size()), v);
    }
    return out;
}

/// Adds every key of `defaults` under `prefix` unless already set.
void fill(KeyValueConfig& c, const std::string& prefix, const KeyValueConfig& defaults) {
    for (const auto& [k, v] : defaults.values()) {
        if (!c.contains(prefix + k)) c.set(prefix + k, v);
    }
}

void fill(KeyValueConfig& c, const std::string& key, const std::string& value) {
    if (!c.contains(key)) c.set(key, value);
}

std::string require(const KeyValueConfig& c, const std::string& key) {
    if (!c.contains(key) || c.get_string(key, "").empty()) throw gse::ConfigError("missing required setting: " + key);
    return c.get_string(key, "");
}

bool get_bool(const KeyValueConfig& c, const std::string& key) {
    const auto v = c.get_string(key, "false");
    if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "off" || v == "0" || v == "no") return false;
    throw gse::ConfigError("config key '" + key + "': not a boolean: " + v);
}

std::uint64_t seed_of(const KeyValueConfig& c) { return static_cast<std::uint64_t>(c.get_int("seed", 0)); }

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw gse::ConfigError("not an integer list: " + s);
        }
    }
    if (out.empty()) throw gse::ConfigError("empty integer list");
    return out;
}

gse::SdeParams sde_params(KeyValueConfig& c) {
    fill(c, "sde.", gse::SdeParams{}.to_config());
    return gse::SdeParams::from_config(with_prefix(c, "sde."));
}

gse::audio::MixSpec mix_spec(KeyValueConfig& c, std::uint64_t default_seed) {
    gse::audio::MixSpec m;
    m.seed = default_seed;
    fill(c, "mix.", m.to_config());
    return gse::audio::MixSpec::from_config(with_prefix(c, "mix."));
}

gse::SamplerConfig sampler_config(KeyValueConfig& c, const gse::SdeParams& p) {
    gse::SamplerConfig s;
    fill(c, "sampler.corrector_steps", std::to_string(s.corrector_steps));
    fill(c, "sampler.corrector_snr", KeyValueConfig::format_double(s.corrector_snr));
    fill(c, "sampler.corrector_rule", "annealed");
    s.N = p.N;
    s.corrector_steps = static_cast<int>(c.get_int("sampler.corrector_steps", s.corrector_steps));
    s.corrector_snr = c.get_double("sampler.corrector_snr", s.corrector_snr);
    const auto rule = c.get_string("sampler.corrector_rule", "annealed");
    if (rule == "annealed") {
        s.corrector_rule = gse::CorrectorRule::Annealed;
    } else if (rule == "snr-adaptive") {
        s.corrector_rule = gse::CorrectorRule::SnrAdaptive;
    } else {
        throw gse::ConfigError("unknown corrector rule: " + rule);
    }
    s.validate();
    return s;
}

/// Resolves the guidance switch from either n_phi or t_phi, never both.
int resolve_n_phi(KeyValueConfig& c, const gse::SdeParams& p) {
    const bool has_n = c.contains("enhance.n_phi"), has_t = c.contains("enhance.t_phi");
    if (has_n && has_t) throw gse::ConfigError("--n-phi and --t-phi are mutually exclusive");
    const int n_phi = has_t ? gse::n_phi_from_t_phi(c.get_double("enhance.t_phi", 0.0), p)
                            : static_cast<int>(c.get_int("enhance.n_phi", 0));
    if (n_phi < 0 || n_phi > p.N) throw gse::ConfigError("n_phi must lie in [0, N]");
    return n_phi;
}

gse::EnhanceMode parse_mode(const std::string& s) {
    if (s == "auto") return gse::EnhanceMode::Auto;
    if (s == "hybrid") return gse::EnhanceMode::Hybrid;
    if (s == "denoiser") return gse::EnhanceMode::DenoiserOnly;
    throw gse::ConfigError("unknown enhance mode: " + s + " (auto, hybrid, denoiser)");
}

struct Models {
    std::optional<gse::nn::ScoreNet> score;
    std::optional<gse::nn::DenoiserNet> denoiser;
};

Models load_models(const KeyValueConfig& c, const std::string& score_key, const std::string& denoiser_key,
                   const gse::SdeParams& p, std::vector<std::string>& inputs) {
    Models m;
    if (const auto path = c.get_string(score_key, ""); !path.empty()) {
        m.score.emplace(gse::nn::load_score_net(gse::nn::Checkpoint::load(path)));
        const auto& q = m.score->sde();
        if (q.gamma != p.gamma || q.sigma_min != p.sigma_min || q.sigma_max != p.sigma_max || q.T != p.T) {
            throw gse::ConfigError("SDE settings differ from those the score network was trained with");
        }
        inputs.push_back(path);
    }
    if (const auto path = c.get_string(denoiser_key, ""); !path.empty()) {
        m.denoiser.emplace(gse::nn::load_denoiser_net(gse::nn::Checkpoint::load(path)));
        inputs.push_back(path);
    }
    return m;
}

/// Defaults for SDE settings come from the score checkpoint when one is given.
void fill_sde_from_checkpoint(KeyValueConfig& c, const std::string& score_key) {
    if (const auto path = c.get_string(score_key, ""); !path.empty()) {
        const auto ck = gse::nn::Checkpoint::load(path);
        for (const auto& [k, v] : ck.header.values()) {
            if (k.rfind("sde.", 0) == 0) fill(c, k, v);
        }
    }
}

struct Run {
    std::string command;
    KeyValueConfig config;
    fs::path out;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    json results = json::object();

    fs::path output(const std::string& name) {
        outputs.push_back(name);
        return out / name;
    }
};

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw gse::ConfigError("cannot write " + path.string());
    f << text;
}

// ---------------------------------------------------------------------------

void cmd_synth(Run& r) {
    auto& c = r.config;
    const auto mix = mix_spec(c, seed_of(c));
    fill(c, "synth.count", "1");
    const auto count = c.get_int("synth.count", 1);
    if (count < 1) throw gse::ConfigError("synth.count must be positive");
    std::string csv = "index,seed,clean,noisy,snr_db\n";
    for (long long i = 0; i < count; ++i) {
        auto m = mix;
        m.seed = mix.seed + static_cast<std::uint64_t>(i);
        const auto pair = gse::audio::synthesize_pair(m);
        char clean[32], noisy[32];
        std::snprintf(clean, sizeof clean, "clean_%03lld.wav", i);
        std::snprintf(noisy, sizeof noisy, "noisy_%03lld.wav", i);
        gse::audio::write_wav(r.output(clean).string(), pair.x0);
        gse::audio::write_wav(r.output(noisy).string(), pair.y);
        const double snr = std::isinf(m.snr_db) ? m.snr_db : gse::audio::snr_db(pair.x0.samples, pair.y.samples);
        csv += std::to_string(i) + "," + std::to_string(m.seed) + "," + clean + "," + noisy + "," +
               KeyValueConfig::format_double(snr) + "\n";
    }
    write_text(r.output("synth.csv"), csv);
}

void cmd_simulate_forward(Run& r) {
    auto& c = r.config;
    const auto p = sde_params(c);
    fill(c, "forward.paths", "10000");
    fill(c, "forward.steps", "2000");
    fill(c, "forward.points", "10");
    fill(c, "forward.x0", "1");
    fill(c, "forward.y", "0.2");
    const auto paths = c.get_int("forward.paths", 0), steps = c.get_int("forward.steps", 0),
               points = c.get_int("forward.points", 0);
    if (paths < 2 || steps < 1 || points < 1 || steps % points != 0) {
        throw gse::ConfigError("forward: need paths >= 2 and steps a positive multiple of points");
    }
    const double x0v = c.get_double("forward.x0", 1.0), yv = c.get_double("forward.y", 0.2);
    const std::vector<double> x0(static_cast<std::size_t>(paths), x0v), y(static_cast<std::size_t>(paths), yv);
    gse::RandomSource rng(seed_of(c));
    const auto snaps =
        gse::euler_maruyama_snapshots(x0, y, p, static_cast<int>(steps), static_cast<int>(steps / points), rng);
    std::string csv = "t,empirical_mean_rel_err,empirical_var,kernel_var\n";
    double worst_var = 0.0;
    for (std::size_t k = 0; k < snaps.size(); ++k) {
        const double t = p.T * static_cast<double>(k + 1) / static_cast<double>(points);
        double sum = 0.0, sq = 0.0;
        for (double v : snaps[k]) sum += v;
        const double mean = sum / static_cast<double>(paths);
        for (double v : snaps[k]) sq += (v - mean) * (v - mean);
        const double var = sq / static_cast<double>(paths - 1);
        const double m_ref = gse::mean(std::vector<double>{x0v}, std::vector<double>{yv}, t, p)[0];
        const double v_ref = gse::variance(t, p);
        const double mean_err = std::abs(mean - m_ref) / std::max(std::abs(m_ref), 1e-300);
        if (v_ref > 0.0) worst_var = std::max(worst_var, std::abs(var / v_ref - 1.0));
        csv += KeyValueConfig::format_double(t) + "," + KeyValueConfig::format_double(mean_err) + "," +
               KeyValueConfig::format_double(var) + "," + KeyValueConfig::format_double(v_ref) + "\n";
    }
    write_text(r.output("forward.csv"), csv);
    r.results["max_rel_var_err"] = worst_var;
}

void cmd_train(Run& r) {
    auto& c = r.config;
    const auto role = require(c, "train.role");
    if (role != "score" && role != "denoiser") throw gse::ConfigError("train.role must be score or denoiser");
    const auto p = sde_params(c);
    const auto mix = mix_spec(c, 1000);
    fill(c, "data.count", "64");
    fill(c, "data.segment", "512");
    fill(c, "train.steps", role == "score" ? "6000" : "1500");
    fill(c, "train.batch_size", "16");
    fill(c, "train.learning_rate", "0.003");
    fill(c, "train.optimizer", "adam");
    const gse::nn::NetShape def_shape;
    fill(c, "net.frame_size", std::to_string(def_shape.frame_size));
    fill(c, "net.hidden", std::to_string(def_shape.hidden));
    fill(c, "net.memory", std::to_string(def_shape.memory));

    const auto count = c.get_int("data.count", 64);
    if (count < 1) throw gse::ConfigError("data.count must be positive");
    std::vector<gse::nn::TrainingPair> utterances;
    for (long long i = 0; i < count; ++i) {
        auto m = mix;
        m.seed = mix.seed + static_cast<std::uint64_t>(i);
        const auto pair = gse::audio::synthesize_pair(m);
        utterances.push_back(gse::normalized_pair(pair.x0.samples, pair.y.samples));
    }
    const gse::nn::SegmentDataset data(std::move(utterances),
                                       static_cast<std::size_t>(c.get_int("data.segment", 512)));

    gse::nn::TrainConfig tc;
    tc.steps = static_cast<int>(c.get_int("train.steps", tc.steps));
    tc.batch_size = static_cast<int>(c.get_int("train.batch_size", tc.batch_size));
    tc.learning_rate = c.get_double("train.learning_rate", tc.learning_rate);
    tc.optimizer = gse::nn::parse_optimizer(c.get_string("train.optimizer", "adam"));
    tc.seed = seed_of(c);
    gse::nn::NetShape shape;
    shape.frame_size = static_cast<std::size_t>(c.get_int("net.frame_size", 0));
    shape.hidden = static_cast<std::size_t>(c.get_int("net.hidden", 0));
    shape.memory = static_cast<std::size_t>(c.get_int("net.memory", 0));
    if (shape.frame_size == 0 || shape.frame_size > static_cast<std::size_t>(c.get_int("data.segment", 512)) ||
        c.get_int("data.segment", 512) % static_cast<long long>(shape.frame_size) != 0) {
        throw gse::ConfigError("data.segment must be a positive multiple of net.frame_size");
    }

    gse::nn::TrainResult result;
    gse::nn::Checkpoint ck;
    if (role == "score") {
        gse::nn::ScoreNet::Config nc;
        nc.shape = shape;
        gse::nn::ScoreNet net(nc, p, tc.seed);
        result = gse::nn::train(net, data, tc);
        ck = gse::nn::make_checkpoint(net, tc);
    } else {
        gse::nn::DenoiserNet net(gse::nn::DenoiserNet::Config{shape}, tc.seed);
        result = gse::nn::train(net, data, tc);
        ck = gse::nn::make_checkpoint(net, tc);
    }
    ck.save(r.output(role + ".ckpt").string());
    std::string csv = "step,loss\n";
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) {
        csv += std::to_string(i) + "," + KeyValueConfig::format_double(result.loss_curve[i]) + "\n";
    }
    write_text(r.output("loss.csv"), csv);
    if (!result.loss_curve.empty()) {
        r.results["first_loss"] = result.loss_curve.front();
        r.results["last_loss"] = result.loss_curve.back();
    }
}

gse::EnhanceOptions enhance_options(KeyValueConfig& c, const gse::SdeParams& p) {
    gse::EnhanceOptions o;
    o.sde = p;
    o.sampler = sampler_config(c, p);
    fill(c, "enhance.mode", "auto");
    fill(c, "enhance.streaming", "false");
    fill(c, "enhance.chunk_ms", "50");
    fill(c, "enhance.normalize", "true");
    o.mode = parse_mode(c.get_string("enhance.mode", "auto"));
    o.streaming = get_bool(c, "enhance.streaming");
    o.stream.chunk_ms = c.get_double("enhance.chunk_ms", 50.0);
    o.normalize = get_bool(c, "enhance.normalize");
    o.seed = seed_of(c);
    return o;
}

void cmd_enhance(Run& r) {
    auto& c = r.config;
    const auto input = require(c, "enhance.input");
    fill_sde_from_checkpoint(c, "enhance.score");
    const auto p = sde_params(c);
    auto o = enhance_options(c, p);
    o.n_phi = resolve_n_phi(c, p);
    const auto y = gse::audio::read_wav(input);
    r.inputs.push_back(input);
    const auto models = load_models(c, "enhance.score", "enhance.denoiser", p, r.inputs);
    o.stream.sample_rate = y.sample_rate;
    const auto res = gse::enhance(y, models.score ? &*models.score : nullptr,
                                  models.denoiser ? &*models.denoiser : nullptr, o);
    gse::audio::write_wav(r.output("enhanced.wav").string(), res.x);

    const auto& L = res.ledger;
    std::vector<std::pair<std::string, std::string>> rows{
        {"n_phi", std::to_string(o.n_phi)},
        {"t_phi", KeyValueConfig::format_double(res.schedule.t_phi)},
        {"score_net_forwards", std::to_string(L.score_net_forwards)},
        {"denoiser_forwards", std::to_string(L.denoiser_forwards)},
        {"mac_total", std::to_string(L.mac_total)},
        {"learned_steps", std::to_string(L.steps(gse::ScoreBranch::Learned))},
        {"discriminative_steps", std::to_string(L.steps(gse::ScoreBranch::Discriminative))},
        {"chunk_size", std::to_string(res.chunk_size)},
        {"gain", KeyValueConfig::format_double(res.gain)},
        {"wall_ms", KeyValueConfig::format_double(res.wall_ms)},
        {"rtf", KeyValueConfig::format_double(res.rtf)},
    };
    if (res.latency) rows.emplace_back("algorithmic_latency_ms", KeyValueConfig::format_double(res.latency->algorithmic_latency_ms));
    std::string csv = "metric,value\n";
    for (const auto& [k, v] : rows) csv += k + "," + v + "\n";
    write_text(r.output("report.csv"), csv);

    r.results["n_phi"] = o.n_phi;
    r.results["score_net_forwards"] = L.score_net_forwards;
    r.results["denoiser_forwards"] = L.denoiser_forwards;
    r.results["mac_total"] = L.mac_total;
    r.results["chunk_size"] = res.chunk_size;
    r.results["rtf"] = res.rtf;
}

struct SweepCell {
    int n_phi = 0;
    std::uint64_t seed = 0;
    double sdr = 0.0;
    double lsd = 0.0;
    std::int64_t score_forwards = 0;
    std::int64_t macs = 0;
    double rtf = 0.0;
};

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

unsigned sweep_threads(std::size_t tasks) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("GSE_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (*end != '\0' || cap < 1) throw gse::ConfigError("GSE_THREADS must be a positive integer");
        n = std::min(n, static_cast<unsigned>(cap));
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, tasks));
}

void cmd_sweep(Run& r) {
    auto& c = r.config;
    require(c, "sweep.score");
    require(c, "sweep.denoiser");
    fill_sde_from_checkpoint(c, "sweep.score");
    const auto p = sde_params(c);
    const auto mix = mix_spec(c, 900000);
    fill(c, "sweep.n_phi", "0,6,12,18,24,30");
    fill(c, "sweep.seeds", "3");
    fill(c, "test.count", "20");
    const auto n_phis = parse_int_list(c.get_string("sweep.n_phi", ""));
    const auto seeds = c.get_int("sweep.seeds", 3);
    const auto count = c.get_int("test.count", 20);
    if (seeds < 1 || count < 1) throw gse::ConfigError("sweep.seeds and test.count must be positive");
    for (int n : n_phis) {
        if (n < 0 || n > p.N) throw gse::ConfigError("sweep n_phi values must lie in [0, N]");
    }
    if (c.contains("enhance.n_phi") || c.contains("enhance.t_phi")) {
        throw gse::ConfigError("sweep takes its n_phi values from sweep.n_phi");
    }
    // Hybrid keeps the single denoiser pass at n_phi = 0, so cost stays affine in n_phi.
    fill(c, "enhance.mode", "hybrid");
    const auto base = enhance_options(c, p);
    if (base.streaming) throw gse::ConfigError("sweep runs offline; streaming is not supported here");
    const auto models = load_models(c, "sweep.score", "sweep.denoiser", p, r.inputs);

    std::vector<gse::audio::MixPair> test;
    for (long long i = 0; i < count; ++i) {
        auto m = mix;
        m.seed = mix.seed + static_cast<std::uint64_t>(i);
        test.push_back(gse::audio::synthesize_pair(m));
    }

    std::vector<SweepCell> cells;
    for (int n : n_phis) {
        for (long long s = 0; s < seeds; ++s) cells.push_back({n, seed_of(c) + static_cast<std::uint64_t>(s)});
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                auto& cell = cells[i];
                auto o = base;
                o.n_phi = cell.n_phi;
                std::vector<double> sdr, lsd;
                double wall_ms = 0.0, duration_s = 0.0;
                for (std::size_t u = 0; u < test.size(); ++u) {
                    o.seed = cell.seed * 1000003ULL + u;
                    const auto res = gse::enhance(test[u].y, &*models.score, &*models.denoiser, o);
                    sdr.push_back(gse::audio::sdr_db(test[u].x0.samples, res.x.samples));
                    lsd.push_back(gse::audio::lsd(test[u].x0.samples, res.x.samples));
                    cell.score_forwards += res.ledger.score_net_forwards;
                    cell.macs += res.ledger.mac_total;
                    wall_ms += res.wall_ms;
                    duration_s += test[u].y.duration_s();
                }
                cell.sdr = median_of(sdr);
                cell.lsd = median_of(lsd);
                cell.rtf = wall_ms / (1000.0 * duration_s);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const unsigned threads = sweep_threads(cells.size());
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    const auto f = [](double v) { return KeyValueConfig::format_double(v); };
    std::string csv = "n_phi,seed,sdr_db,lsd,score_forwards,macs,rtf\n";
    for (const auto& cell : cells) {
        csv += std::to_string(cell.n_phi) + "," + std::to_string(cell.seed) + "," + f(cell.sdr) + "," + f(cell.lsd) +
               "," + std::to_string(cell.score_forwards) + "," + std::to_string(cell.macs) + "," + f(cell.rtf) + "\n";
    }
    json medians = json::array();
    for (int n : n_phis) {
        std::vector<double> sdr, lsd, rtf;
        const SweepCell* any = nullptr;
        for (const auto& cell : cells) {
            if (cell.n_phi != n) continue;
            sdr.push_back(cell.sdr);
            lsd.push_back(cell.lsd);
            rtf.push_back(cell.rtf);
            any = &cell;
        }
        csv += std::to_string(n) + ",median," + f(median_of(sdr)) + "," + f(median_of(lsd)) + "," +
               std::to_string(any->score_forwards) + "," + std::to_string(any->macs) + "," + f(median_of(rtf)) + "\n";
        medians.push_back({{"n_phi", n}, {"sdr_db", median_of(sdr)}, {"rtf", median_of(rtf)}, {"macs", any->macs}});
    }
    write_text(r.output("sweep.csv"), csv);
    r.results["medians"] = medians;
    r.results["threads"] = threads;
}

const std::map<std::string, std::function<void(Run&)>>& commands() {
    static const std::map<std::string, std::function<void(Run&)>> table{
        {"synth", cmd_synth},   {"simulate-forward", cmd_simulate_forward}, {"train", cmd_train},
        {"enhance", cmd_enhance}, {"sweep", cmd_sweep},
    };
    return table;
}

void execute(Run& r) {
    fs::create_directories(r.out);
    const auto started = utc_now();
    commands().at(r.command)(r);
    json config = json::object();
    for (const auto& [k, v] : r.config.values()) config[k] = v;
    json manifest{
        {"command", r.command},
        {"version", GSE_VERSION},
        {"seed", seed_of(r.config)},
        {"config", config},
        {"inputs", r.inputs},
        {"outputs", r.outputs},
        {"results", r.results},
        {"started_at", started},
        {"finished_at", utc_now()},
    };
    write_text(r.out / "manifest.json", manifest.dump(2) + "\n");
    std::cout << (r.out / "manifest.json").string() << "\n";
}

Run replay_run(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw gse::ConfigError("cannot open manifest: " + manifest_path);
    json m;
    try {
        m = json::parse(f);
    } catch (const json::exception& e) {
        throw gse::FormatError("manifest is not valid JSON: " + std::string(e.what()));
    }
    Run r;
    r.command = m.value("command", "");
    if (!commands().count(r.command)) throw gse::ConfigError("manifest names an unknown command: " + r.command);
    if (!m.contains("config") || !m["config"].is_object()) throw gse::FormatError("manifest has no config object");
    for (const auto& [k, v] : m["config"].items()) {
        if (!v.is_string()) throw gse::FormatError("manifest config values must be strings");
        r.config.set(k, v.get<std::string>());
    }
    return r;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Streaming score-based speech enhancement with discriminative guidance"};
    app.require_subcommand(1);
    app.set_version_flag("--version", GSE_VERSION);

    struct Common {
        std::string config;
        std::string out = "out";
        std::map<std::string, std::string> overrides;
    };
    std::map<std::string, Common> common;
    std::string replay_manifest, replay_out;

    auto add_common = [&](CLI::App* sub) {
        auto& cm = common[sub->get_name()];
        sub->add_option("--config", cm.config, "Flat key = value config file")->check(CLI::ExistingFile);
        sub->add_option("--out", cm.out, "Output directory");
        sub->add_option_function<long long>(
            "--seed", [&cm](long long v) { cm.overrides["seed"] = std::to_string(v); }, "Root random seed");
        sub->add_option_function<std::vector<std::string>>(
               "--set",
               [&cm](const std::vector<std::string>& kv) {
                   for (const auto& s : kv) {
                       const auto eq = s.find('=');
                       if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--set", "expected key=value");
                       cm.overrides[s.substr(0, eq)] = s.substr(eq + 1);
                   }
               },
               "Override any config key (key=value)")
            ->take_all();
        return &cm;
    };
    auto bind = [](CLI::App* sub, Common* cm, const std::string& flag, const std::string& key, const std::string& help) {
        return sub->add_option_function<std::string>(
            flag, [cm, key](const std::string& v) { cm->overrides[key] = v; }, help);
    };

    auto* synth = app.add_subcommand("synth", "Synthesize clean/noisy WAV pairs");
    auto* cs = add_common(synth);
    bind(synth, cs, "--count", "synth.count", "Number of pairs");
    bind(synth, cs, "--snr-db", "mix.snr_db", "Input SNR in dB");

    auto* fwd = app.add_subcommand("simulate-forward", "Compare forward-SDE ensembles with the closed-form kernel");
    auto* cf = add_common(fwd);
    bind(fwd, cf, "--paths", "forward.paths", "Monte-Carlo paths");
    bind(fwd, cf, "--steps", "forward.steps", "Euler-Maruyama steps");

    auto* train = app.add_subcommand("train", "Train the score network or the denoiser");
    auto* ct = add_common(train);
    bind(train, ct, "--role", "train.role", "score or denoiser")->check(CLI::IsMember({"score", "denoiser"}));
    bind(train, ct, "--steps", "train.steps", "Optimizer steps");

    auto* enh = app.add_subcommand("enhance", "Enhance a WAV file");
    auto* ce = add_common(enh);
    bind(enh, ce, "--input", "enhance.input", "Noisy PCM16 mono WAV");
    bind(enh, ce, "--score", "enhance.score", "Score network checkpoint");
    bind(enh, ce, "--denoiser", "enhance.denoiser", "Denoiser checkpoint");
    auto* nphi = bind(enh, ce, "--n-phi", "enhance.n_phi", "Reverse steps served by the discriminative score");
    auto* tphi = bind(enh, ce, "--t-phi", "enhance.t_phi", "Switch time above which guidance is used");
    nphi->excludes(tphi);
    bind(enh, ce, "--mode", "enhance.mode", "auto, hybrid or denoiser");
    bind(enh, ce, "--streaming", "enhance.streaming", "Chunked causal processing (true/false)");
    bind(enh, ce, "--chunk-ms", "enhance.chunk_ms", "Chunk length in ms");

    auto* sweep = app.add_subcommand("sweep", "Sweep n_phi over a synthetic test set");
    auto* cw = add_common(sweep);
    bind(sweep, cw, "--score", "sweep.score", "Score network checkpoint");
    bind(sweep, cw, "--denoiser", "sweep.denoiser", "Denoiser checkpoint");
    bind(sweep, cw, "--n-phi", "sweep.n_phi", "Comma-separated n_phi values");
    bind(sweep, cw, "--seeds", "sweep.seeds", "Sampler seeds per n_phi");
    bind(sweep, cw, "--count", "test.count", "Test utterances");

    auto* replay = app.add_subcommand("replay", "Re-run a command from its manifest");
    replay->add_option("manifest", replay_manifest, "manifest.json of an earlier run")->required();
    replay->add_option("--out", replay_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        Run run;
        if (replay->parsed()) {
            run = replay_run(replay_manifest);
            run.out = replay_out;
        } else {
            const auto* sub = app.get_subcommands().front();
            const auto& cm = common.at(sub->get_name());
            run.command = sub->get_name();
            if (!cm.config.empty()) run.config = KeyValueConfig::load(cm.config);
            for (const auto& [k, v] : cm.overrides) run.config.set(k, v);
            run.out = cm.out;
        }
        execute(run);
        return 0;
    } catch (const gse::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const gse::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gse::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gse::DimensionError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gse::DomainError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
