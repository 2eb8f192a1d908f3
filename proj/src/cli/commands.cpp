#include "dve/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dve/analysis/exact.hpp"
#include "dve/analysis/experiments.hpp"
#include "dve/analysis/true_values.hpp"
#include "dve/cli/config.hpp"
#include "dve/models/checkpoint.hpp"
#include "dve/textio.hpp"

namespace dve::cli {

namespace fs = std::filesystem;
using textio::num;

namespace {

/// Exclusive ownership of an output directory for one process.
class RunLock {
public:
    explicit RunLock(fs::path path) : path_(std::move(path)) {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) throw std::runtime_error("output directory is locked by another run (" + path_.string() +
                                     "); delete the lock file if no run is active");
        std::fclose(f);
    }
    ~RunLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path path_;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + p.string());
}

RunConfig config_with_overrides(const fs::path& path, const std::vector<std::string>& overrides) {
    RunConfig cfg = load_config(path);
    for (const auto& o : overrides) apply_override(cfg, o);
    return cfg;
}

/// Keeps the header and every row whose leading step field is <= max_step.
void truncate_csv(const fs::path& p, std::int64_t max_step) {
    if (!fs::exists(p)) return;
    std::istringstream in(read_file(p));
    std::string line, kept;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            kept += line + '\n';
            header = false;
            continue;
        }
        const std::int64_t step = std::stoll(line.substr(0, line.find(',')));
        if (step <= max_step) kept += line + '\n';
    }
    write_file(p, kept);
}

std::string checkpoint_name(std::int64_t update) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "update_%08lld.ckpt", static_cast<long long>(update));
    return buf;
}

std::optional<fs::path> latest_checkpoint(const fs::path& dir) {
    std::optional<fs::path> best;
    if (!fs::exists(dir)) return best;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.rfind("update_", 0) != 0 || e.path().extension() != ".ckpt") continue;
        if (!best || name > best->filename().string()) best = e.path();
    }
    return best;
}

const char* kEvalHeader = "step,update,mean_total_reward,success_rate,spl";

std::string eval_row(std::int64_t step, std::int64_t update, const envs::EvalMetrics& m) {
    return std::to_string(step) + ',' + std::to_string(update) + ',' + num(m.mean_total_reward) + ',' +
           num(m.success_rate) + ',' + num(m.spl);
}

void write_summary(const fs::path& dir, const train::Trainer& t, double seconds) {
    std::vector<double> rewards;
    std::istringstream in(read_file(dir / "eval.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::istringstream row(line);
        for (std::string c; std::getline(row, c, ',');) f.push_back(c);
        rewards.push_back(std::stod(f.at(2)));
    }
    std::ostringstream out;
    out << "updates " << t.update_index() << '\n' << "env_steps " << t.env_steps() << '\n';
    if (!rewards.empty()) {
        const std::size_t k = std::min<std::size_t>(10, rewards.size());
        double last = 0.0;
        for (std::size_t i = rewards.size() - k; i < rewards.size(); ++i) last += rewards[i];
        out << "final_mean_reward_last_" << k << "_evals " << num(last / static_cast<double>(k)) << '\n';
        out << "best_eval_reward " << num(*std::max_element(rewards.begin(), rewards.end())) << '\n';
    }
    out << "wall_clock_seconds " << num(seconds) << '\n';
    write_file(dir / "summary.txt", out.str());
}

void check_checkpoint_matches(const models::Checkpoint& ck, const RunConfig& cfg, const envs::LevelHandle& level) {
    if (!(ck.config == train::net_config(cfg.train, level))) {
        throw ConfigError(0, "checkpoint", "network layout does not match the configuration and level set");
    }
    auto it = ck.extra.find("family");
    if (it != ck.extra.end() && it->second != envs::family_name(level.family)) {
        throw ConfigError(0, "checkpoint", "trained on family '" + it->second + "'");
    }
}

std::vector<std::size_t> parse_counts(const std::string& s) {
    std::vector<std::size_t> out;
    std::istringstream in(s);
    for (std::string tok; std::getline(in, tok, ',');) {
        if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
            throw UsageError("--counts expects a comma-separated list of positive integers");
        }
        out.push_back(std::stoull(tok));
        if (out.back() == 0) throw UsageError("--counts entries must be positive");
    }
    if (out.empty()) throw UsageError("--counts is empty");
    return out;
}

}  // namespace

int cmd_train(const TrainOptions& opt, std::ostream& out) {
    const RunConfig cfg = config_with_overrides(opt.config, opt.overrides);
    const fs::path dir = resolve_output_dir(cfg);
    fs::create_directories(dir / "checkpoints");
    RunLock lock(dir / "run.lock");
    const fs::path metrics = dir / "metrics.csv", evals = dir / "eval.csv";
    const auto started = std::chrono::steady_clock::now();

    std::optional<train::Trainer> trainer;
    if (opt.resume) {
        if (fs::exists(dir / "config.ini") && read_file(dir / "config.ini") != emit_config(cfg)) {
            throw ConfigError(0, "config", "differs from the configuration of the run being resumed");
        }
        const auto ck_path = latest_checkpoint(dir / "checkpoints");
        if (!ck_path) throw std::runtime_error("--resume: no checkpoint under " + (dir / "checkpoints").string());
        const auto ck = models::load_checkpoint(*ck_path);
        try {
            trainer.emplace(cfg.train, ck);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(0, "checkpoint", e.what());
        }
        truncate_csv(metrics, trainer->env_steps());
        truncate_csv(evals, trainer->env_steps());
        if (!opt.quiet) out << "resumed from " << ck_path->filename().string() << " at update " << trainer->update_index() << '\n';
    } else {
        if (fs::exists(metrics)) {
            throw std::runtime_error(dir.string() + " already holds a run; use --resume or a fresh output directory");
        }
        write_file(dir / "config.ini", emit_config(cfg));
        write_file(metrics, train::metrics_header() + '\n');
        write_file(evals, std::string(kEvalHeader) + '\n');
        trainer.emplace(cfg.train);
    }

    std::ofstream mout(metrics, std::ios::app), eout(evals, std::ios::app);
    if (!mout || !eout) throw std::runtime_error("cannot append to the metrics files in " + dir.string());
    auto& t = *trainer;
    const auto& c = t.config();
    while (!t.finished()) {
        const auto rec = t.step();
        mout << train::metrics_row(rec) << '\n' << std::flush;
        const auto u = t.update_index();
        if (cfg.eval_every > 0 && u % static_cast<std::int64_t>(cfg.eval_every) == 0) {
            const auto rep = train::evaluate_policy(t.net(), t.levels(), cfg.eval_episodes,
                                                    derive_seed(c.seed, "eval-cadence", static_cast<std::uint64_t>(u)),
                                                    false, c.rollout.horizon);
            eout << eval_row(t.env_steps(), u, rep.metrics) << '\n' << std::flush;
            if (!opt.quiet) out << "update " << u << " step " << t.env_steps() << " eval_reward " << num(rep.metrics.mean_total_reward) << '\n';
        }
        if (cfg.checkpoint_every > 0 && u % static_cast<std::int64_t>(cfg.checkpoint_every) == 0) {
            models::save_checkpoint(dir / "checkpoints" / checkpoint_name(u), t.checkpoint());
        }
        if (opt.stop_after >= 0 && u >= opt.stop_after) {
            if (!opt.quiet) out << "stopped after update " << u << '\n';
            return kOk;
        }
    }
    models::save_checkpoint(dir / "checkpoints" / checkpoint_name(t.update_index()), t.checkpoint());
    models::save_checkpoint(dir / "final.ckpt", t.checkpoint());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_summary(dir, t, secs);
    if (!opt.quiet) out << "finished " << t.update_index() << " updates, " << t.env_steps() << " env steps in " << dir.string() << '\n';
    return kOk;
}

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
    if (opt.episodes == 0) throw UsageError("--episodes must be >= 1");
    const RunConfig cfg = config_with_overrides(opt.config, opt.overrides);
    const auto levels = opt.levels ? envs::import_level_set(read_file(*opt.levels)) : train::make_levels(cfg.train);
    if (levels.empty()) throw ConfigError(0, "levels", "empty level set");
    const auto ck = models::load_checkpoint(opt.checkpoint);
    check_checkpoint_matches(ck, cfg, levels.front());
    const models::ActorCritic net(ck.config, ck.params);
    const auto rep = train::evaluate_policy(net, levels, opt.episodes, opt.seed, opt.greedy, cfg.train.rollout.horizon);
    const auto& m = rep.metrics;
    out << "episodes " << m.episodes << " mean_total_reward " << num(m.mean_total_reward) << " success_rate "
        << num(m.success_rate) << " spl " << num(m.spl) << '\n';
    if (opt.out) {
        write_file(*opt.out, "episodes,mean_total_reward,success_rate,spl\n" + std::to_string(m.episodes) + ',' +
                                 num(m.mean_total_reward) + ',' + num(m.success_rate) + ',' + num(m.spl) + '\n');
    }
    return kOk;
}

namespace {

fs::path analysis_dir(const AnalyzeOptions& opt) {
    if (!opt.out.empty()) return opt.out;
    const char* root = std::getenv(kOutputRootEnv);
    return fs::path(root && *root ? root : "runs") / "analysis";
}

RunConfig need_config(const AnalyzeOptions& opt) {
    if (!opt.config) throw UsageError("analyze " + opt.subcommand + " needs --config");
    return config_with_overrides(*opt.config, opt.overrides);
}

models::ActorCritic need_network(const AnalyzeOptions& opt, const RunConfig& cfg, const envs::LevelHandle& level) {
    if (!opt.checkpoint) throw UsageError("analyze " + opt.subcommand + " needs --checkpoint");
    const auto ck = models::load_checkpoint(*opt.checkpoint);
    check_checkpoint_matches(ck, cfg, level);
    return models::ActorCritic(ck.config, ck.params);
}

std::string aic_curve_csv(const analysis::ClusterSelection& sel) {
    std::vector<analysis::CurvePoint> curve;
    for (std::size_t c = 0; c < sel.aic_per_point.size(); ++c) curve.push_back({double(c + 1), sel.aic_per_point[c], 0.0, 1});
    return analysis::curve_csv(curve);
}

/// Gapworld levels: reference-policy Bellman values. With a checkpoint:
/// fine-tuned critic estimates on 64 probes sampled under the policy.
analysis::ValueMatrix value_matrix_for(const AnalyzeOptions& opt, const RunConfig& cfg) {
    const auto levels = train::make_levels(cfg.train);
    if (opt.checkpoint) {
        const auto net = need_network(opt, cfg, levels.front());
        const auto probes = analysis::sample_probes(net, levels, 64, derive_seed(opt.seed, "probes"), cfg.train.rollout.horizon);
        auto res = analysis::estimate_true_values(net, levels, probes, analysis::FineTuneConfig{}, derive_seed(opt.seed, "finetune"),
                                                  "checkpoint");
        return std::move(res.matrix);
    }
    if (cfg.train.family != envs::Family::gapworld) throw UsageError("oracle value matrices need the gapworld family or --checkpoint");
    std::vector<std::size_t> states;
    if (opt.state) {
        states.push_back(*opt.state);
    } else {
        states.push_back(levels.front().spec.n_states / 2);
    }
    return analysis::gapworld_oracle_matrix(levels, states);
}

int analyze_clusters(const AnalyzeOptions& opt, const fs::path& dir, std::ostream& out) {
    const RunConfig cfg = need_config(opt);
    const auto m = value_matrix_for(opt, cfg);
    write_file(dir / "value_matrix.txt", analysis::serialize_value_matrix(m));
    std::ostringstream rows, hist;
    rows << "state,c_star,prefers_multiple";
    for (std::size_t c = 1; c <= std::min(opt.c_max, m.n_levels - 1); ++c) rows << ",aic_per_point_c" << c;
    rows << '\n';
    hist << "state,bin_lo,bin_hi,count\n";
    std::size_t multiple = 0;
    for (std::size_t k = 0; k < m.n_states; ++k) {
        const auto rep = analysis::clustering_hypothesis_test(m, k, opt.c_max, analysis::EmConfig{}, derive_seed(opt.seed, "clusters", k));
        rows << m.state_ids[k] << ',' << rep.selection.best << ',' << (rep.prefers_multiple ? 1 : 0);
        for (double a : rep.selection.aic_per_point) rows << ',' << num(a);
        rows << '\n';
        for (std::size_t b = 0; b < rep.hist.counts.size(); ++b) {
            hist << m.state_ids[k] << ',' << num(rep.hist.edges[b]) << ',' << num(rep.hist.edges[b + 1]) << ',' << rep.hist.counts[b] << '\n';
        }
        multiple += rep.prefers_multiple ? 1 : 0;
        if (m.n_states == 1) out << "state " << m.state_ids[k] << ": C* = " << rep.selection.best << '\n';
    }
    write_file(dir / "clusters.csv", rows.str());
    write_file(dir / "clusters_histogram.csv", hist.str());
    out << "clusters: " << multiple << " of " << m.n_states << " probe states prefer C >= 2\n";
    return kOk;
}

int analyze_aic(const AnalyzeOptions& opt, const fs::path& dir, std::ostream& out) {
    analysis::ValueMatrix m;
    if (opt.matrix) {
        m = analysis::parse_value_matrix(read_file(*opt.matrix));
    } else if (opt.templates > 0) {
        m = analysis::synthetic_archetype_matrix(50, 64, opt.templates, 0.3, derive_seed(opt.seed, "synthetic"));
    } else {
        m = value_matrix_for(opt, need_config(opt));
    }
    const std::size_t c_max = std::min(opt.c_max, m.n_levels - 1);
    const auto sel = analysis::select_num_clusters(m.values, m.n_levels, m.n_states, c_max, analysis::EmConfig{},
                                                   derive_seed(opt.seed, "aic"));
    write_file(dir / "aic.csv", aic_curve_csv(sel));
    write_file(dir / "aic_best.gmm", analysis::serialize_gmm(sel.fits[sel.best - 1]));
    out << "aic: C* = " << sel.best << " over C = 1.." << c_max << " (" << m.n_levels << " rows, d = " << m.n_states << ")\n";
    return kOk;
}

int analyze_decompose(const AnalyzeOptions& opt, const fs::path& dir, std::ostream& out) {
    const auto levels = analysis::default_tabular_set(opt.seed == 0 ? 7 : opt.seed);
    const std::size_t S = levels.front().spec.n_states, A = levels.front().spec.n_actions;
    Rng rng(derive_seed(opt.seed, "decompose"));
    std::vector<double> logits(S * A);
    for (auto& l : logits) l = rng.normal();
    const auto policy = analysis::softmax_policy(S, A, logits);
    const auto tables = analysis::exact_tables(levels, policy);
    std::vector<double> noise(S * levels.size());
    for (auto& n : noise) n = rng.normal(0.0, 2.0);

    struct Case {
        std::string name;
        analysis::Predictor f;
    };
    const std::vector<Case> cases{
        {"oracle", [&](std::size_t s, std::size_t m) { return tables.v[m][s]; }},
        {"oracle_plus_0.5", [&](std::size_t s, std::size_t m) { return tables.v[m][s] + 0.5; }},
        {"level_average", [&](std::size_t s, std::size_t) { return tables.v_bar[s]; }},
        {"random", [&](std::size_t s, std::size_t m) { return noise[m * S + s]; }},
    };
    std::ostringstream csv;
    csv << "critic,total,minimal,prediction_error,cross_term,identity_residual\n";
    double worst_residual = 0.0, worst_cross = 0.0, oracle_error = 0.0;
    for (const auto& c : cases) {
        const auto d = analysis::variance_decomposition(levels, policy, c.f);
        const double residual = std::abs(d.total - (d.minimal + d.prediction_error + d.cross_term));
        worst_residual = std::max(worst_residual, residual);
        worst_cross = std::max(worst_cross, std::abs(d.cross_term));
        if (c.name == "oracle") oracle_error = d.prediction_error;
        csv << c.name << ',' << num(d.total) << ',' << num(d.minimal) << ',' << num(d.prediction_error) << ','
            << num(d.cross_term) << ',' << num(residual) << '\n';
    }
    write_file(dir / "decompose.csv", csv.str());
    const bool pass = worst_residual <= 1e-9 && worst_cross <= 1e-9 && oracle_error == 0.0;
    out << "decompose: " << (pass ? "PASS" : "FAIL") << " identity_residual " << num(worst_residual) << " max_cross_term "
        << num(worst_cross) << " oracle_prediction_error " << num(oracle_error) << '\n';
    return pass ? kOk : kRuntimeFailure;
}

int analyze_lemmas(const AnalyzeOptions& opt, const fs::path& dir, std::ostream& out) {
    const auto levels = analysis::default_tabular_set(opt.seed == 0 ? 7 : opt.seed);
    const std::size_t S = levels.front().spec.n_states, A = levels.front().spec.n_actions, M = levels.size();
    Rng rng(derive_seed(opt.seed, "lemmas"));
    std::vector<double> theta(S * A);
    for (auto& t : theta) t = rng.normal();
    const auto policy = analysis::softmax_policy(S, A, theta);
    const auto tables = analysis::exact_tables(levels, policy);

    std::ostringstream l1;
    l1 << "baseline,max_abs_diff,passed\n";
    double worst = 0.0;
    bool pass1 = true;
    auto check = [&](const std::string& name, const analysis::Predictor& f) {
        const auto r = analysis::lemma1_check(levels, theta, f);
        worst = std::max(worst, r.max_abs_diff);
        pass1 = pass1 && r.passed;
        l1 << name << ',' << num(r.max_abs_diff) << ',' << (r.passed ? 1 : 0) << '\n';
    };
    check("zero", [](std::size_t, std::size_t) { return 0.0; });
    check("true_value", [&](std::size_t s, std::size_t m) { return tables.v[m][s]; });
    for (int i = 0; i < 20; ++i) {
        std::vector<double> table(S * M);
        for (auto& v : table) v = rng.normal(0.0, 5.0);
        check("random_" + std::to_string(i), [table, S](std::size_t s, std::size_t m) { return table[m * S + s]; });
    }
    write_file(dir / "lemma1.csv", l1.str());

    const auto r2 = analysis::lemma2_sweep(levels, policy);
    std::ostringstream l2;
    l2 << "lambda,expected_psi2\n";
    for (std::size_t i = 0; i < r2.lambdas.size(); ++i) l2 << num(r2.lambdas[i]) << ',' << num(r2.objective[i]) << '\n';
    write_file(dir / "lemma2.csv", l2.str());
    const bool pass2 = r2.best_lambda == 1.0 && r2.max_second_diff_dev <= 1e-9;
    const bool pass = pass1 && pass2;
    out << "lemmas: " << (pass ? "PASS" : "FAIL") << " max_grad_deviation " << num(worst) << " best_lambda "
        << num(r2.best_lambda) << " second_difference_spread " << num(r2.max_second_diff_dev) << '\n';
    return pass ? kOk : kRuntimeFailure;
}

int analyze_variance_curve(const AnalyzeOptions& opt, const fs::path& dir, std::ostream& out) {
    const RunConfig cfg = need_config(opt);
    analysis::VarianceCurveConfig vc;
    vc.level_counts = opt.counts;
    vc.n_seeds = opt.seeds;
    vc.fraction = opt.fraction;
    vc.base = cfg.train;
    analysis::Progress progress;
    if (!opt.quiet) progress = [&](const std::string& s) { out << s << '\n' << std::flush; };
    const auto curve = analysis::variance_vs_levels(vc, cfg.train.seed, progress);
    write_file(dir / "variance_curve.csv", analysis::curve_csv(curve));
    out << "variance-curve: " << curve.size() << " points written\n";
    return kOk;
}

int analyze_confusion(const AnalyzeOptions& opt, const fs::path& dir, std::ostream& out) {
    const RunConfig cfg = need_config(opt);
    const auto levels = train::make_levels(cfg.train);
    const auto net = need_network(opt, cfg, levels.front());
    if (net.config().head != models::HeadKind::dynamic) throw UsageError("analyze confusion needs a dynamic-head checkpoint");
    const auto table = analysis::confusion_table(net, levels, opt.episodes, derive_seed(opt.seed, "confusion"),
                                                 cfg.train.rollout.horizon);
    write_file(dir / "confusion_steps.csv", analysis::confusion_steps_csv(table));
    write_file(dir / "confusion_episodes.csv", analysis::confusion_episodes_csv(table));
    double lo = 1.0, hi = 0.0;
    for (const auto& s : table.steps) {
        lo = std::min(lo, s.delta);
        hi = std::max(hi, s.delta);
    }
    const double floor = 1.0 / static_cast<double>(table.n_basis);
    const bool in_range = lo >= floor - 1e-12 && hi <= 1.0 + 1e-12;
    out << "confusion: " << table.steps.size() << " steps, delta in [" << num(lo) << ", " << num(hi) << "] "
        << (in_range ? "within" : "OUTSIDE") << " [1/N_b, 1]\n";
    return in_range ? kOk : kRuntimeFailure;
}

int analyze_heads(const AnalyzeOptions& opt, const fs::path& dir, std::ostream& out) {
    const RunConfig cfg = need_config(opt);
    std::vector<models::HeadKind> heads;
    for (const auto& h : opt.heads) heads.push_back(models::parse_head(h));
    analysis::Progress progress;
    if (!opt.quiet) progress = [&](const std::string& s) { out << s << '\n' << std::flush; };
    const auto runs = analysis::compare_heads(cfg.train, heads, opt.seeds, cfg.train.seed, analysis::HeadEvalConfig{}, progress);
    write_file(dir / "heads.csv", analysis::head_runs_csv(runs));
    out << "heads: " << runs.size() << " runs written\n";
    return kOk;
}

}  // namespace

int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out) {
    const fs::path dir = analysis_dir(opt);
    if (opt.subcommand == "clusters") return analyze_clusters(opt, dir, out);
    if (opt.subcommand == "aic") return analyze_aic(opt, dir, out);
    if (opt.subcommand == "decompose") return analyze_decompose(opt, dir, out);
    if (opt.subcommand == "lemmas") return analyze_lemmas(opt, dir, out);
    if (opt.subcommand == "variance-curve") return analyze_variance_curve(opt, dir, out);
    if (opt.subcommand == "confusion") return analyze_confusion(opt, dir, out);
    if (opt.subcommand == "heads") return analyze_heads(opt, dir, out);
    throw UsageError("unknown analyze subcommand '" + opt.subcommand + "'");
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Dynamic value estimation laboratory", "dvelab"};
    app.require_subcommand(1);

    TrainOptions topt;
    auto* train = app.add_subcommand("train", "Train one configuration");
    train->add_option("config", topt.config, "Config file")->required();
    train->add_option("--set", topt.overrides, "Override section.key=value");
    train->add_flag("--resume", topt.resume, "Continue from the latest checkpoint in the output directory");
    train->add_option("--stop-after", topt.stop_after, "Stop after this update (simulated interrupt)");
    train->add_flag("--quiet", topt.quiet);

    EvalOptions eopt;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--config", eopt.config, "Config file")->required();
    eval->add_option("--checkpoint", eopt.checkpoint, "Checkpoint file")->required();
    eval->add_option("--set", eopt.overrides, "Override section.key=value");
    std::string levels_path, eval_out;
    eval->add_option("--levels", levels_path, "Exported level set to evaluate on");
    eval->add_option("--episodes", eopt.episodes, "Episode count");
    eval->add_option("--seed", eopt.seed, "Evaluation seed");
    eval->add_flag("--greedy", eopt.greedy, "Arg-max actions");
    eval->add_option("--out", eval_out, "CSV report path");

    AnalyzeOptions aopt;
    auto* analyze = app.add_subcommand("analyze", "Analysis experiments");
    std::string counts, config_path, ckpt_path, matrix_path, out_dir, heads;
    std::size_t state = 0;
    auto* state_opt = analyze->add_option("--state", state, "Probe state index");
    analyze->add_option("subcommand", aopt.subcommand, "clusters|aic|decompose|lemmas|variance-curve|confusion|heads")
        ->required()
        ->check(CLI::IsMember({"clusters", "aic", "decompose", "lemmas", "variance-curve", "confusion", "heads"}));
    analyze->add_option("--config", config_path, "Config file");
    analyze->add_option("--checkpoint", ckpt_path, "Checkpoint file");
    analyze->add_option("--matrix", matrix_path, "Serialized value matrix (aic)");
    analyze->add_option("--set", aopt.overrides, "Override section.key=value");
    analyze->add_option("--out", out_dir, "Artifact directory");
    analyze->add_option("--seed", aopt.seed, "Analysis seed");
    analyze->add_option("--cmax", aopt.c_max, "Largest component count");
    analyze->add_option("--templates", aopt.templates, "aic: synthetic archetype count");
    analyze->add_option("--seeds", aopt.seeds, "Seeds per point (variance-curve, heads)");
    analyze->add_option("--counts", counts, "variance-curve level counts, e.g. 1,5,20");
    analyze->add_option("--fraction", aopt.fraction, "variance-curve leading share of updates");
    analyze->add_option("--episodes", aopt.episodes, "confusion episode count");
    analyze->add_option("--heads", heads, "heads: comma-separated head list");
    analyze->add_flag("--quiet", aopt.quiet);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*train) return cmd_train(topt, out);
        if (*eval) {
            if (!levels_path.empty()) eopt.levels = levels_path;
            if (!eval_out.empty()) eopt.out = eval_out;
            return cmd_eval(eopt, out);
        }
        if (!config_path.empty()) aopt.config = config_path;
        if (!ckpt_path.empty()) aopt.checkpoint = ckpt_path;
        if (!matrix_path.empty()) aopt.matrix = matrix_path;
        if (*state_opt) aopt.state = state;
        aopt.out = out_dir;
        if (!counts.empty()) aopt.counts = parse_counts(counts);
        if (!heads.empty()) {
            aopt.heads.clear();
            std::istringstream in(heads);
            for (std::string h; std::getline(in, h, ',');) aopt.heads.push_back(h);
        }
        return cmd_analyze(aopt, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeFailure;
    }
}

}  // namespace dve::cli
