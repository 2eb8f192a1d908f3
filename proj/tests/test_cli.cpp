#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dve/cli/commands.hpp"
#include "dve/cli/config.hpp"
#include "dve/envs/solve.hpp"
#include "dve/models/checkpoint.hpp"

using namespace dve;
using namespace dve::cli;
namespace fs = std::filesystem;

namespace {

const char* kTiny = R"(# tiny tabular run
[experiment]
name = tiny
total_steps = 3200
eval_every = 20
eval_episodes = 10
checkpoint_every = 50

[env]
family = tabular
n_levels = 4

[model]
encoder_hidden = 16
lstm_hidden = 16

[train]
n_workers = 2
steps_per_worker = 8
bptt_len = 8
n_minibatches = 2
kappa_samples = 8
)";

struct Sandbox {
    fs::path dir;
    Sandbox() {
        dir = fs::temp_directory_path() / ("dve_cli_" + std::to_string(std::rand()) + "_" + std::to_string(counter()++));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Sandbox() { fs::remove_all(dir); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(dir / name) << text;
        return dir / name;
    }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream b;
    b << in.rdbuf();
    return b.str();
}

int call(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "dvelab");
    std::vector<const char*> argv;
    for (auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str() + err.str();
    return rc;
}

}  // namespace

TEST_CASE("config: defaults, round trip and overrides") {
    const RunConfig def = parse_config("");
    CHECK(def == RunConfig{});
    const RunConfig cfg = parse_config(kTiny);
    CHECK(cfg.train.rollout.steps_per_worker == 8);
    CHECK(cfg.train.family == envs::Family::tabular);
    const std::string text = emit_config(cfg);
    CHECK(parse_config(text) == cfg);
    CHECK(emit_config(parse_config(text)) == text);

    RunConfig o = cfg;
    apply_override(o, "train.lr=0.001");
    apply_override(o, "model.head=dynamic");
    CHECK(o.train.update.lr == 0.001);
    CHECK(o.train.head == models::HeadKind::dynamic);
    CHECK(config_keys().size() > 20);
}

TEST_CASE("config: diagnostics name the line and field") {
    try {
        parse_config("[train]\nlr = 0.1\nbogus = 3\n");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 3);
        CHECK(e.field() == "train.bogus");
    }
    try {
        parse_config("[env]\nn_levels = many\n");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(e.line() == 2);
        CHECK(e.field() == "env.n_levels");
    }
    CHECK_THROWS_AS(parse_config("[nope]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[train]\nlr = 1\nlr = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[train]\nbptt_len = 7\n"), ConfigError);
    RunConfig c;
    CHECK_THROWS_AS(apply_override(c, "lr=3"), ConfigError);
}

TEST_CASE("output directory resolution") {
    RunConfig c;
    c.name = "abc";
    setenv(kOutputRootEnv, "/tmp/dve_root", 1);
    CHECK(resolve_output_dir(c) == fs::path("/tmp/dve_root/abc"));
    c.output_dir = "/tmp/explicit";
    CHECK(resolve_output_dir(c) == fs::path("/tmp/explicit"));
    unsetenv(kOutputRootEnv);
}

TEST_CASE("train: metrics rows, determinism and exact resume") {
    Sandbox sb;
    const auto cfg = sb.write("tiny.ini", kTiny);
    const auto a = (sb.dir / "a").string(), b = (sb.dir / "b").string(), c = (sb.dir / "c").string();
    REQUIRE(call({"train", cfg.string(), "--quiet", "--set", "experiment.output_dir=" + a}) == kOk);
    REQUIRE(call({"train", cfg.string(), "--quiet", "--set", "experiment.output_dir=" + b}) == kOk);
    const auto metrics = slurp(fs::path(a) / "metrics.csv");
    std::size_t rows = 0;
    for (char ch : metrics) rows += ch == '\n';
    CHECK(rows - 1 >= 200);
    CHECK(metrics == slurp(fs::path(b) / "metrics.csv"));
    CHECK(slurp(fs::path(a) / "eval.csv") == slurp(fs::path(b) / "eval.csv"));
    CHECK(fs::exists(fs::path(a) / "final.ckpt"));
    CHECK(fs::exists(fs::path(a) / "summary.txt"));
    CHECK_FALSE(fs::exists(fs::path(a) / "run.lock"));

    REQUIRE(call({"train", cfg.string(), "--quiet", "--stop-after", "133", "--set", "experiment.output_dir=" + c}) == kOk);
    CHECK_FALSE(fs::exists(fs::path(c) / "final.ckpt"));
    REQUIRE(call({"train", cfg.string(), "--quiet", "--resume", "--set", "experiment.output_dir=" + c}) == kOk);
    CHECK(slurp(fs::path(c) / "metrics.csv") == metrics);
    CHECK(slurp(fs::path(c) / "eval.csv") == slurp(fs::path(a) / "eval.csv"));
    CHECK(slurp(fs::path(c) / "final.ckpt") == slurp(fs::path(a) / "final.ckpt"));

    // A finished directory is never overwritten; a held lock refuses a second run.
    CHECK(call({"train", cfg.string(), "--quiet", "--set", "experiment.output_dir=" + a}) == kRuntimeFailure);
    const auto d = sb.dir / "d";
    fs::create_directories(d);
    std::ofstream(d / "run.lock") << "";
    CHECK(call({"train", cfg.string(), "--quiet", "--set", "experiment.output_dir=" + d.string()}) == kRuntimeFailure);
    CHECK(call({"train", cfg.string(), "--quiet", "--resume", "--set", "experiment.output_dir=" + a, "--set",
                "train.lr=0.1"}) == kConfigError);
}

TEST_CASE("exit codes") {
    Sandbox sb;
    const auto bad = sb.write("bad.ini", "[train]\nalgo = sarsa\n");
    CHECK(call({}) == kUsage);
    CHECK(call({"frobnicate"}) == kUsage);
    CHECK(call({"train", bad.string()}) == kConfigError);
    CHECK(call({"train", (sb.dir / "missing.ini").string()}) == kConfigError);
    CHECK(call({"analyze", "confusion"}) == kUsage);
}

TEST_CASE("eval: random policy success matches the absorption probability") {
    Sandbox sb;
    const auto cfg_path = sb.write("g.ini", "[env]\nfamily = gapworld\nn_levels = 1\nlevel_seed = 4\n");
    const RunConfig cfg = load_config(cfg_path);
    const auto level = train::make_levels(cfg.train).front();
    models::Checkpoint ck;
    ck.config = train::net_config(cfg.train, level);
    ck.params = models::ActorCritic::make_layout(ck.config);  // zero weights: uniform policy
    ck.extra["family"] = "gapworld";
    models::save_checkpoint(sb.dir / "rand.ckpt", ck);

    const std::size_t n = 4000;
    std::string out;
    REQUIRE(call({"eval", "--config", cfg_path.string(), "--checkpoint", (sb.dir / "rand.ckpt").string(), "--episodes",
                  std::to_string(n), "--out", (sb.dir / "e.csv").string()},
                 &out) == kOk);
    const double exact = envs::absorption_probability(level.spec, envs::TabularPolicy::uniform(level.spec.n_states, 2),
                                                      {level.spec.n_states - 1}, cfg.train.rollout.horizon);
    std::istringstream csv(slurp(sb.dir / "e.csv"));
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    std::vector<std::string> f;
    std::istringstream rs(row);
    for (std::string x; std::getline(rs, x, ',');) f.push_back(x);
    const double rate = std::stod(f.at(2));
    CHECK(std::abs(rate - exact) <= 4.0 * std::sqrt(exact * (1 - exact) / n) + 1e-12);

    std::string g1, g2;
    CHECK(call({"eval", "--config", cfg_path.string(), "--checkpoint", (sb.dir / "rand.ckpt").string(), "--greedy"}, &g1) == kOk);
    CHECK(call({"eval", "--config", cfg_path.string(), "--checkpoint", (sb.dir / "rand.ckpt").string(), "--greedy"}, &g2) == kOk);
    CHECK(g1 == g2);
    CHECK(call({"eval", "--config", cfg_path.string(), "--checkpoint", (sb.dir / "rand.ckpt").string(), "--episodes", "0"}) == kUsage);
    CHECK(call({"eval", "--config", cfg_path.string(), "--checkpoint", (sb.dir / "rand.ckpt").string(), "--set",
                "model.lstm_hidden=8"}) == kConfigError);
}

TEST_CASE("analyze: lemmas, decompose, aic and confusion") {
    Sandbox sb;
    std::string out;
    CHECK(call({"analyze", "lemmas", "--out", sb.dir.string()}, &out) == kOk);
    CHECK(out.find("lemmas: PASS") != std::string::npos);
    CHECK(call({"analyze", "decompose", "--out", sb.dir.string()}, &out) == kOk);
    CHECK(out.find("decompose: PASS") != std::string::npos);
    CHECK(call({"analyze", "aic", "--templates", "2", "--out", sb.dir.string()}, &out) == kOk);
    CHECK(out.find("C* = 2") != std::string::npos);
    CHECK(slurp(sb.dir / "aic.csv").rfind("x,mean,stderr,n_seeds\n", 0) == 0);

    const auto cfg_path = sb.write("d.ini", "[env]\nfamily = gapworld\nn_levels = 4\n[model]\nhead = dynamic\nencoder_hidden = 8\nlstm_hidden = 8\n");
    const RunConfig cfg = load_config(cfg_path);
    models::Checkpoint ck;
    ck.config = train::net_config(cfg.train, train::make_levels(cfg.train).front());
    ck.params = models::ActorCritic(ck.config, 3).params();
    models::save_checkpoint(sb.dir / "dyn.ckpt", ck);
    CHECK(call({"analyze", "confusion", "--config", cfg_path.string(), "--checkpoint", (sb.dir / "dyn.ckpt").string(), "--out",
                sb.dir.string()},
               &out) == kOk);
    CHECK(out.find("within") != std::string::npos);
    CHECK(fs::exists(sb.dir / "confusion_episodes.csv"));

    const std::string first = slurp(sb.dir / "confusion_steps.csv");
    CHECK(call({"analyze", "confusion", "--config", cfg_path.string(), "--checkpoint", (sb.dir / "dyn.ckpt").string(), "--out",
                sb.dir.string()}) == kOk);
    CHECK(slurp(sb.dir / "confusion_steps.csv") == first);
}
