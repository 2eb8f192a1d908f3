#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dve/diff/adam.hpp"
#include "dve/models/network.hpp"

namespace dve::models {

struct OptimizerState {
    std::int64_t steps = 0;
    std::vector<diff::Tensor> m;  // parameter order
    std::vector<diff::Tensor> v;
};

/// Versioned text checkpoint. Floats are written in hexadecimal, so a
/// save/load round trip is bit-exact.
struct Checkpoint {
    NetConfig config;
    std::uint64_t seed = 0;
    std::int64_t update = 0;
    std::int64_t env_steps = 0;
    diff::ParamStore params;
    std::optional<OptimizerState> optimizer;
    std::map<std::string, std::string> extra;  // keys and values without whitespace
};

inline constexpr const char* kCheckpointMagic = "dve-checkpoint 1";

std::string serialize_checkpoint(const Checkpoint& ck);
/// Throws std::runtime_error naming the offending line on malformed input.
Checkpoint parse_checkpoint(const std::string& text);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

OptimizerState capture_optimizer(const diff::Adam& adam);
void restore_optimizer(diff::Adam& adam, const OptimizerState& state);

}  // namespace dve::models
