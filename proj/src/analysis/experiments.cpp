#include "dve/analysis/experiments.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dve/analysis/true_values.hpp"
#include "dve/models/cluster_metrics.hpp"
#include "dve/textio.hpp"

namespace dve::analysis {

using textio::num;

CurvePoint summarize(double x, const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("summarize: no samples");
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= n;
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);
    const double se = samples.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return {x, mean, se, samples.size()};
}

std::string curve_csv(const std::vector<CurvePoint>& curve) {
    std::ostringstream out;
    out << "x,mean,stderr,n_seeds\n";
    for (const auto& p : curve) out << num(p.x) << ',' << num(p.mean) << ',' << num(p.stderr_mean) << ',' << p.n_seeds << '\n';
    return out.str();
}

ValueMatrix synthetic_archetype_matrix(std::size_t n_levels, std::size_t dim, std::size_t n_templates, double noise,
                                       std::uint64_t seed) {
    if (n_levels == 0 || dim == 0 || n_templates == 0) throw std::invalid_argument("synthetic_archetype_matrix: empty shape");
    Rng rng(seed);
    std::vector<std::vector<double>> templates(n_templates, std::vector<double>(dim));
    for (auto& t : templates)
        for (auto& v : t) v = rng.uniform(-5.0, 5.0);
    ValueMatrix m;
    m.n_levels = n_levels;
    m.n_states = dim;
    m.policy_tag = "synthetic";
    for (std::size_t k = 0; k < dim; ++k) m.state_ids.push_back(k);
    for (std::size_t i = 0; i < n_levels; ++i) {
        for (double v : templates[i % n_templates]) m.values.push_back(v + noise * rng.normal());
        m.level_ids.push_back(i);
    }
    return m;
}

ValueMatrix gapworld_oracle_matrix(const std::vector<envs::LevelHandle>& levels, const std::vector<std::size_t>& states) {
    for (const auto& l : levels)
        if (l.family != envs::Family::gapworld) throw std::invalid_argument("gapworld_oracle_matrix: non-gapworld level");
    return exact_values(levels, envs::gapworld_reference_policy, states, "gapworld-reference");
}

std::vector<CurvePoint> variance_vs_levels(const VarianceCurveConfig& cfg, std::uint64_t master_seed,
                                           const Progress& progress) {
    if (cfg.level_counts.empty() || cfg.n_seeds == 0) throw std::invalid_argument("variance_vs_levels: nothing to run");
    if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) throw std::invalid_argument("variance_vs_levels: fraction must be in (0, 1]");
    std::vector<CurvePoint> curve;
    for (std::size_t count : cfg.level_counts) {
        std::vector<double> per_seed;
        for (std::size_t s = 0; s < cfg.n_seeds; ++s) {
            train::TrainConfig tc = cfg.base;
            tc.head = models::HeadKind::baseline;
            tc.n_levels = count;
            tc.seed = derive_seed(master_seed, "variance-curve", s);
            // Each replicate draws its own level set so a point is not tied to one fixed level.
            tc.level_seed = derive_seed(master_seed, "variance-curve-levels", s);
            train::Trainer trainer(tc);
            const auto leading = std::max<std::int64_t>(
                1, static_cast<std::int64_t>(std::ceil(cfg.fraction * static_cast<double>(tc.total_updates()))));
            double sum = 0.0;
            for (std::int64_t u = 0; u < leading && !trainer.finished(); ++u) sum += trainer.step().stats.sample_variance_psi2;
            per_seed.push_back(sum / static_cast<double>(leading));
            if (progress) progress("levels=" + std::to_string(count) + " seed=" + std::to_string(s) + " psi2=" + num(per_seed.back()));
        }
        curve.push_back(summarize(static_cast<double>(count), per_seed));
    }
    return curve;
}

HeadRun run_head(const train::TrainConfig& cfg, const HeadEvalConfig& eval, const Progress& progress) {
    train::Trainer trainer(cfg);
    HeadRun r;
    r.head = cfg.head;
    r.seed = cfg.seed;
    double kl = 0.0, psi2 = 0.0, conf = 0.0;
    std::size_t n = 0;
    while (!trainer.finished()) {
        const auto rec = trainer.step();
        kl += rec.stats.kl_old_new;
        psi2 += rec.stats.sample_variance_psi2;
        conf += rec.mean_confusion;
        ++n;
    }
    const double dn = static_cast<double>(std::max<std::size_t>(n, 1));
    r.mean_kl = kl / dn;
    r.mean_psi2 = psi2 / dn;
    r.mean_confusion = cfg.head == models::HeadKind::dynamic ? conf / dn : std::numeric_limits<double>::quiet_NaN();
    const auto rep = train::evaluate_policy(trainer.net(), trainer.levels(), eval.eval_episodes,
                                            derive_seed(cfg.seed, "final-eval"), false, cfg.rollout.horizon);
    r.eval_reward = rep.metrics.mean_total_reward;
    r.success_rate = rep.metrics.success_rate;
    r.spl = rep.metrics.spl;
    r.prediction_error = prediction_error_mc(trainer.net(), trainer.levels(), eval.probes, eval.continuations,
                                             derive_seed(cfg.seed, "prediction-error"), cfg.rollout.horizon,
                                             eval.continuation_cap)
                             .mean_sq_error;
    if (progress) {
        progress(std::string(models::head_name(r.head)) + " seed=" + std::to_string(r.seed) + " reward=" +
                 num(r.eval_reward) + " pred_err=" + num(r.prediction_error) + " kl=" + num(r.mean_kl));
    }
    return r;
}

std::vector<HeadRun> compare_heads(const train::TrainConfig& base, const std::vector<models::HeadKind>& heads,
                                   std::size_t n_seeds, std::uint64_t master_seed, const HeadEvalConfig& eval,
                                   const Progress& progress) {
    std::vector<HeadRun> out;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        for (auto h : heads) {
            train::TrainConfig tc = base;
            tc.head = h;
            tc.seed = derive_seed(master_seed, "head-seed", s);
            out.push_back(run_head(tc, eval, progress));
        }
    }
    return out;
}

std::string head_runs_csv(const std::vector<HeadRun>& runs) {
    std::ostringstream out;
    out << "head,seed,eval_reward,success_rate,spl,prediction_error,mean_kl,mean_psi2,mean_confusion\n";
    for (const auto& r : runs) {
        out << models::head_name(r.head) << ',' << r.seed << ',' << num(r.eval_reward) << ',' << num(r.success_rate) << ','
            << num(r.spl) << ',' << num(r.prediction_error) << ',' << num(r.mean_kl) << ',' << num(r.mean_psi2) << ','
            << num(r.mean_confusion) << '\n';
    }
    return out.str();
}

ConfusionTable confusion_table(const models::ActorCritic& net, const std::vector<envs::LevelHandle>& levels,
                               std::size_t episodes, std::uint64_t seed, std::size_t horizon) {
    if (net.config().head != models::HeadKind::dynamic) throw std::invalid_argument("confusion_table: needs a dynamic head");
    if (levels.empty() || episodes == 0) throw std::invalid_argument("confusion_table: need levels and episodes");
    ConfusionTable table;
    table.n_basis = net.config().n_basis;
    for (std::size_t e = 0; e < episodes; ++e) {
        const auto& level = levels[e % levels.size()];
        Rng rng(derive_seed(seed, "confusion", e));
        std::size_t s = level.sample_start(rng);
        auto lstm = diff::LstmState::zeros(net.config().lstm_hidden);
        std::vector<std::vector<double>> trace;
        double delta_sum = 0.0;
        for (std::size_t t = 0; t < horizon && !level.spec.is_terminal(s); ++t) {
            auto so = models::infer_step(net, level.observe(s), lstm);
            const auto& alpha = *so.critic.alpha;
            const double d = models::confusion(alpha);
            delta_sum += d;
            table.steps.push_back({e, level.seed, level.archetype, t, d, alpha});
            trace.push_back(alpha);
            std::vector<double> p(so.policy.log_probs.size());
            for (std::size_t a = 0; a < p.size(); ++a) p[a] = std::exp(so.policy.log_probs[a]);
            s = envs::step(level, s, rng.categorical(p), rng).next_state;
            lstm = std::move(so.next_state);
        }
        if (trace.empty()) continue;
        table.episodes.push_back({e, level.seed, level.archetype, trace.size(),
                                  delta_sum / static_cast<double>(trace.size()), models::contribution(trace)});
    }
    return table;
}

std::string confusion_steps_csv(const ConfusionTable& t) {
    std::ostringstream out;
    out << "episode,level_seed,archetype,t,delta";
    for (std::size_t i = 0; i < t.n_basis; ++i) out << ",alpha_" << i;
    out << '\n';
    for (const auto& r : t.steps) {
        out << r.episode << ',' << r.level_seed << ',' << r.archetype << ',' << r.t << ',' << num(r.delta);
        for (double a : r.alpha) out << ',' << num(a);
        out << '\n';
    }
    return out.str();
}

std::string confusion_episodes_csv(const ConfusionTable& t) {
    std::ostringstream out;
    out << "episode,level_seed,archetype,length,mean_delta";
    for (std::size_t i = 0; i < t.n_basis; ++i) out << ",rho_" << i;
    out << '\n';
    for (const auto& r : t.episodes) {
        out << r.episode << ',' << r.level_seed << ',' << r.archetype << ',' << r.length << ',' << num(r.mean_delta);
        for (double c : r.contribution) out << ',' << num(c);
        out << '\n';
    }
    return out.str();
}

}  // namespace dve::analysis
