#include <gtest/gtest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "gse/gse.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const fs::path kScratch{GSE_CLI_SCRATCH};

int run(const std::string& args) {
    const std::string cmd = std::string(GSE_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
    std::vector<std::string> out;
    std::ifstream f(p);
    for (std::string l; std::getline(f, l);) out.push_back(l);
    return out;
}

json manifest(const fs::path& dir) { return json::parse(slurp(dir / "manifest.json")); }

fs::path dir(const std::string& name) {
    const auto d = kScratch / name;
    fs::remove_all(d);
    return d;
}

/// Tiny networks trained for a few steps, shared by the enhancement tests.
struct TinyModels {
    fs::path score, denoiser, noisy;
    TinyModels() {
        const std::string common = " --set net.frame_size=16 net.hidden=8 net.memory=4 data.count=4 data.segment=64"
                                   " train.steps=3 mix.duration_s=0.1";
        const auto s = kScratch / "tiny_score", d = kScratch / "tiny_den", w = kScratch / "tiny_wav";
        if (run("train --role score --out " + s.string() + common) != 0) throw std::runtime_error("score train");
        if (run("train --role denoiser --out " + d.string() + common) != 0) throw std::runtime_error("den train");
        if (run("synth --out " + w.string() + " --set mix.duration_s=0.2") != 0) throw std::runtime_error("synth");
        score = s / "score.ckpt";
        denoiser = d / "denoiser.ckpt";
        noisy = w / "noisy_000.wav";
    }
    std::string nets() const { return " --score " + score.string() + " --denoiser " + denoiser.string(); }
};

const TinyModels& models() {
    static const TinyModels m;
    return m;
}

TEST(Cli, SynthWritesPairsAndManifest) {
    const auto d = dir("synth");
    ASSERT_EQ(run("synth --count 2 --snr-db 5 --seed 7 --out " + d.string()), 0);
    for (const char* f : {"clean_000.wav", "noisy_000.wav", "clean_001.wav", "noisy_001.wav", "synth.csv"}) {
        EXPECT_TRUE(fs::exists(d / f)) << f;
    }
    const auto m = manifest(d);
    EXPECT_EQ(m["command"], "synth");
    EXPECT_EQ(m["seed"], 7);
    EXPECT_EQ(m["config"]["mix.snr_db"], "5");
    EXPECT_TRUE(m.contains("version") && m.contains("started_at") && m.contains("finished_at"));
    const auto rows = lines(d / "synth.csv");
    ASSERT_EQ(rows.size(), 3u);
    const auto last = rows[2].substr(rows[2].rfind(',') + 1);
    EXPECT_NEAR(std::stod(last), 5.0, 1e-9);
}

TEST(Cli, SimulateForwardTable) {
    const auto d = dir("forward");
    ASSERT_EQ(run("simulate-forward --paths 10000 --steps 2000 --out " + d.string()), 0);
    const auto rows = lines(d / "forward.csv");
    ASSERT_EQ(rows.size(), 11u);
    EXPECT_EQ(rows[0], "t,empirical_mean_rel_err,empirical_var,kernel_var");
    EXPECT_LT(manifest(d)["results"]["max_rel_var_err"].get<double>(), 0.05);
}

TEST(Cli, SimulateForwardWithoutDiffusion) {
    const auto d = dir("forward_flat");
    ASSERT_EQ(run("simulate-forward --paths 100 --steps 200 --set sde.sigma_max=0.0001 --out " + d.string()), 0);
    const auto rows = lines(d / "forward.csv");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::stringstream ss(rows[i]);
        std::string t, err, var;
        std::getline(ss, t, ',');
        std::getline(ss, err, ',');
        std::getline(ss, var, ',');
        EXPECT_LT(std::stod(var), 1e-12);
    }
}

TEST(Cli, TrainWritesCheckpointAndLossCurve) {
    const auto& m = models();
    EXPECT_TRUE(fs::exists(m.score));
    const auto rows = lines(m.score.parent_path() / "loss.csv");
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], "step,loss");
    EXPECT_NO_THROW((void)gse::nn::load_denoiser_net(gse::nn::Checkpoint::load(m.denoiser.string())));
}

TEST(Cli, PureGenerativeSkipsDenoiser) {
    const auto& m = models();
    const auto d = dir("enh_gen");
    ASSERT_EQ(run("enhance --input " + m.noisy.string() + m.nets() + " --n-phi 0 --out " + d.string()), 0);
    EXPECT_EQ(manifest(d)["results"]["denoiser_forwards"], 0);
    EXPECT_TRUE(fs::exists(d / "enhanced.wav"));
    EXPECT_EQ(gse::audio::read_wav((d / "enhanced.wav").string()).size(), 3200u);
}

TEST(Cli, StreamingChunkSizeInManifest) {
    const auto& m = models();
    const auto d = dir("enh_stream");
    ASSERT_EQ(run("enhance --input " + m.noisy.string() + m.nets() +
                  " --n-phi 12 --streaming true --chunk-ms 50 --out " + d.string()),
              0);
    EXPECT_EQ(manifest(d)["results"]["chunk_size"], 800);
    EXPECT_EQ(manifest(d)["config"]["enhance.streaming"], "true");
}

TEST(Cli, ReplayReproducesOutputsBitExactly) {
    const auto& m = models();
    const auto a = dir("enh_a"), b = dir("enh_b");
    ASSERT_EQ(run("enhance --input " + m.noisy.string() + m.nets() + " --n-phi 5 --seed 3 --out " + a.string()), 0);
    ASSERT_EQ(run("replay " + (a / "manifest.json").string() + " --out " + b.string()), 0);
    EXPECT_EQ(slurp(a / "enhanced.wav"), slurp(b / "enhanced.wav"));
}

TEST(Cli, SweepTable) {
    const auto& m = models();
    const auto d = dir("sweep");
    ASSERT_EQ(run("sweep" + m.nets() + " --n-phi 0,10,20,30 --seeds 2 --count 2 --set mix.duration_s=0.1 --out " +
                  d.string()),
              0);
    const auto rows = lines(d / "sweep.csv");
    ASSERT_EQ(rows.size(), 1u + 8u + 4u);
    EXPECT_EQ(rows[0], "n_phi,seed,sdr_db,lsd,score_forwards,macs,rtf");
    const auto med = manifest(d)["results"]["medians"];
    ASSERT_EQ(med.size(), 4u);
    const long long m0 = med[0]["macs"], m1 = med[1]["macs"], m2 = med[2]["macs"], m3 = med[3]["macs"];
    EXPECT_EQ(m1 - m0, m2 - m1);
    EXPECT_EQ(m2 - m1, m3 - m2);
    EXPECT_LT(m1, m0);
}

TEST(Cli, ExitCodes) {
    const auto& m = models();
    EXPECT_EQ(run("enhance --input " + m.noisy.string() + m.nets() + " --n-phi 3 --t-phi 0.5 --out " +
                  dir("x1").string()),
              2);
    EXPECT_EQ(run("enhance --input " + m.noisy.string() + " --score /nonexistent.ckpt --out " + dir("x2").string()),
              2);
    EXPECT_EQ(run("train --role score --set sde.gamma=-1 --out " + dir("x3").string()), 2);
    EXPECT_EQ(run("nonsense"), 2);
    EXPECT_EQ(run("train --role denoiser --set train.learning_rate=1e300 net.frame_size=16 data.count=2 "
                  "data.segment=64 train.steps=5 --out " +
                  dir("x4").string()),
              3);
}

}  // namespace
