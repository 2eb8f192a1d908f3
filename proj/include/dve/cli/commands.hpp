#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dve::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfigError = 2, kRuntimeFailure = 3 };

/// Missing or contradictory command-line inputs.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainOptions {
    std::filesystem::path config;
    std::vector<std::string> overrides;
    bool resume = false;
    std::int64_t stop_after = -1;  // stop after this update without a final checkpoint
    bool quiet = false;
};

struct EvalOptions {
    std::filesystem::path config;
    std::filesystem::path checkpoint;
    std::vector<std::string> overrides;
    std::optional<std::filesystem::path> levels;  // exported level set; default: the config's levels
    std::size_t episodes = 100;
    std::uint64_t seed = 0;
    bool greedy = false;
    std::optional<std::filesystem::path> out;  // CSV report
};

struct AnalyzeOptions {
    std::string subcommand;
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> checkpoint;
    std::optional<std::filesystem::path> matrix;
    std::vector<std::string> overrides;
    std::filesystem::path out;  // empty: <output root>/analysis
    std::uint64_t seed = 0;
    std::size_t c_max = 10;
    std::optional<std::size_t> state;
    std::size_t templates = 0;  // aic: synthetic source when > 0
    std::size_t seeds = 3;
    std::vector<std::size_t> counts{1, 5, 20, 50, 100};
    double fraction = 0.5;
    std::size_t episodes = 20;
    std::vector<std::string> heads{"baseline", "dynamic", "control"};
    bool quiet = false;
};

int cmd_train(const TrainOptions& opt, std::ostream& out);
int cmd_eval(const EvalOptions& opt, std::ostream& out);
int cmd_analyze(const AnalyzeOptions& opt, std::ostream& out);

/// Parses argv and dispatches, mapping failures onto the exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dve::cli
