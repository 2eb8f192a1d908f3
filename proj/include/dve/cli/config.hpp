#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "dve/train/trainer.hpp"

namespace dve::cli {

/// Invalid configuration text or value. `line` is 0 when the problem does
/// not come from a file line (for example a `--set` override).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, std::string field, const std::string& what);
    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

struct RunConfig {
    std::string name = "run";
    std::string output_dir;  // empty: <output root>/<name>
    train::TrainConfig train;
    std::size_t eval_every = 10;  // updates between evaluations; 0 disables
    std::size_t eval_episodes = 50;
    std::size_t checkpoint_every = 50;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Sectioned key-value text: `[section]` headers, `key = value` lines,
/// `#` or `;` comments. Unknown sections or keys are rejected. Values
/// missing from the text keep their defaults.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Applies `section.key=value`.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Canonical text listing every key; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& cfg);

/// Every `section.key` name in emit order.
std::vector<std::string> config_keys();

/// Environment variable naming the default output root.
inline constexpr const char* kOutputRootEnv = "DVE_OUTPUT_ROOT";

/// output_dir when set, otherwise $DVE_OUTPUT_ROOT/<name> (or runs/<name>).
std::filesystem::path resolve_output_dir(const RunConfig& cfg);

}  // namespace dve::cli
