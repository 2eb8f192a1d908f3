#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dve/analysis/value_matrix.hpp"
#include "dve/envs/level.hpp"
#include "dve/models/network.hpp"
#include "dve/train/trainer.hpp"

namespace dve::analysis {

/// One x position of a multi-seed curve.
struct CurvePoint {
    double x = 0.0;
    double mean = 0.0;
    double stderr_mean = 0.0;  // sample stddev / sqrt(n); 0 for one seed
    std::size_t n_seeds = 0;
};

CurvePoint summarize(double x, const std::vector<double>& samples);

/// Columns x, mean, stderr, n_seeds.
std::string curve_csv(const std::vector<CurvePoint>& curve);

/// Rows alternate over `n_templates` archetype templates with coordinates
/// drawn from U(-5, 5); each row adds N(0, noise^2) per coordinate.
ValueMatrix synthetic_archetype_matrix(std::size_t n_levels, std::size_t dim, std::size_t n_templates, double noise,
                                       std::uint64_t seed);

/// Bellman values of the hazard-aware reference policy at `states`.
ValueMatrix gapworld_oracle_matrix(const std::vector<envs::LevelHandle>& levels, const std::vector<std::size_t>& states);

using Progress = std::function<void(const std::string&)>;

struct VarianceCurveConfig {
    std::vector<std::size_t> level_counts{1, 5, 20, 50, 100};
    std::size_t n_seeds = 3;
    double fraction = 0.5;  // leading share of updates averaged
    train::TrainConfig base;  // head forced to baseline; n_levels overridden
};

/// Mean sample_variance_psi2 over the leading `fraction` of updates for
/// each level count, one training run per (count, seed).
std::vector<CurvePoint> variance_vs_levels(const VarianceCurveConfig& cfg, std::uint64_t master_seed,
                                           const Progress& progress = {});

struct HeadEvalConfig {
    std::size_t eval_episodes = 200;
    std::size_t probes = 100;
    std::size_t continuations = 32;
    std::size_t continuation_cap = 1000;
};

struct HeadRun {
    models::HeadKind head = models::HeadKind::baseline;
    std::uint64_t seed = 0;
    double eval_reward = 0.0;
    double success_rate = 0.0;
    double spl = 0.0;
    double prediction_error = 0.0;
    double mean_kl = 0.0;
    double mean_psi2 = 0.0;
    double mean_confusion = 0.0;  // NaN without a dynamic head
};

/// Trains `cfg` to completion and measures the finished policy.
HeadRun run_head(const train::TrainConfig& cfg, const HeadEvalConfig& eval, const Progress& progress = {});

/// Every head over every seed, seeds derived from `master_seed` and shared
/// across heads so runs pair by seed index.
std::vector<HeadRun> compare_heads(const train::TrainConfig& base, const std::vector<models::HeadKind>& heads,
                                   std::size_t n_seeds, std::uint64_t master_seed, const HeadEvalConfig& eval,
                                   const Progress& progress = {});

std::string head_runs_csv(const std::vector<HeadRun>& runs);

struct ConfusionStep {
    std::size_t episode = 0;
    std::uint64_t level_seed = 0;
    int archetype = 0;
    std::size_t t = 0;
    double delta = 0.0;
    std::vector<double> alpha;
};

struct ConfusionEpisode {
    std::size_t episode = 0;
    std::uint64_t level_seed = 0;
    int archetype = 0;
    std::size_t length = 0;
    double mean_delta = 0.0;
    std::vector<double> contribution;
};

struct ConfusionTable {
    std::size_t n_basis = 0;
    std::vector<ConfusionStep> steps;
    std::vector<ConfusionEpisode> episodes;
};

/// Per-step posteriors and per-episode contributions of a dynamic-head
/// policy. Episode e plays level e mod |levels|. Rejects other heads.
ConfusionTable confusion_table(const models::ActorCritic& net, const std::vector<envs::LevelHandle>& levels,
                               std::size_t episodes, std::uint64_t seed, std::size_t horizon);

std::string confusion_steps_csv(const ConfusionTable& t);
std::string confusion_episodes_csv(const ConfusionTable& t);

}  // namespace dve::analysis
