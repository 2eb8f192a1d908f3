#include "dve/cli/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace dve::cli {

ConfigError::ConfigError(std::size_t line, std::string field, const std::string& what)
    : std::runtime_error((line ? "line " + std::to_string(line) + ": " : std::string()) +
                         (field.empty() ? what : field + ": " + what)),
      line_(line),
      field_(std::move(field)) {}

namespace {

using Getter = std::function<std::string(const RunConfig&)>;
using Setter = std::function<void(RunConfig&, const std::string&)>;

struct Field {
    std::string section;
    std::string key;
    Getter get;
    Setter set;
};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Value converters throw std::invalid_argument; the caller attaches context.
std::uint64_t to_u64(const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
    }
    return std::stoull(v);
}

double to_double(const std::string& v) {
    std::size_t used = 0;
    double d = 0.0;
    try {
        d = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (v.empty() || used != v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
    return d;
}

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("expected true or false, got '" + v + "'");
}

// Shortest text that parses back to the same double.
std::string from_double(double d) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, r.ptr);
}

const std::vector<Field>& fields() {
    using train::TrainConfig;
    static const std::vector<Field> all = [] {
        std::vector<Field> f;
        auto tc = [](RunConfig& c) -> TrainConfig& { return c.train; };
        auto ctc = [](const RunConfig& c) -> const TrainConfig& { return c.train; };
        auto add_size = [&](std::string sec, std::string key, std::function<std::size_t&(RunConfig&)> ref) {
            f.push_back({sec, key, [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); },
                         [ref](RunConfig& c, const std::string& v) { ref(c) = static_cast<std::size_t>(to_u64(v)); }});
        };
        auto add_double = [&](std::string sec, std::string key, std::function<double&(RunConfig&)> ref) {
            f.push_back({sec, key, [ref](const RunConfig& c) { return from_double(ref(const_cast<RunConfig&>(c))); },
                         [ref](RunConfig& c, const std::string& v) { ref(c) = to_double(v); }});
        };

        f.push_back({"experiment", "name", [](const RunConfig& c) { return c.name; },
                     [](RunConfig& c, const std::string& v) {
                         if (v.empty() || v.find_first_of(" \t/\\") != std::string::npos) {
                             throw std::invalid_argument("name must be non-empty without spaces or slashes");
                         }
                         c.name = v;
                     }});
        f.push_back({"experiment", "output_dir", [](const RunConfig& c) { return c.output_dir; },
                     [](RunConfig& c, const std::string& v) { c.output_dir = v; }});
        f.push_back({"experiment", "seed", [ctc](const RunConfig& c) { return std::to_string(ctc(c).seed); },
                     [tc](RunConfig& c, const std::string& v) { tc(c).seed = to_u64(v); }});
        f.push_back({"experiment", "total_steps", [ctc](const RunConfig& c) { return std::to_string(ctc(c).total_steps); },
                     [tc](RunConfig& c, const std::string& v) {
                         const auto n = to_u64(v);
                         if (n == 0) throw std::invalid_argument("total_steps must be >= 1");
                         tc(c).total_steps = static_cast<std::int64_t>(n);
                     }});
        add_size("experiment", "eval_every", [](RunConfig& c) -> std::size_t& { return c.eval_every; });
        add_size("experiment", "eval_episodes", [](RunConfig& c) -> std::size_t& { return c.eval_episodes; });
        add_size("experiment", "checkpoint_every", [](RunConfig& c) -> std::size_t& { return c.checkpoint_every; });

        f.push_back({"env", "family", [ctc](const RunConfig& c) { return std::string(envs::family_name(ctc(c).family)); },
                     [tc](RunConfig& c, const std::string& v) { tc(c).family = envs::parse_family(v); }});
        add_size("env", "n_levels", [](RunConfig& c) -> std::size_t& { return c.train.n_levels; });
        f.push_back({"env", "level_seed", [ctc](const RunConfig& c) { return std::to_string(ctc(c).level_seed); },
                     [tc](RunConfig& c, const std::string& v) { tc(c).level_seed = to_u64(v); }});
        add_size("env", "horizon", [](RunConfig& c) -> std::size_t& { return c.train.rollout.horizon; });

        f.push_back({"model", "head", [ctc](const RunConfig& c) { return std::string(models::head_name(ctc(c).head)); },
                     [tc](RunConfig& c, const std::string& v) { tc(c).head = models::parse_head(v); }});
        add_size("model", "n_basis", [](RunConfig& c) -> std::size_t& { return c.train.n_basis; });
        add_size("model", "n_control", [](RunConfig& c) -> std::size_t& { return c.train.n_control; });
        add_size("model", "encoder_hidden", [](RunConfig& c) -> std::size_t& { return c.train.encoder_hidden; });
        add_size("model", "lstm_hidden", [](RunConfig& c) -> std::size_t& { return c.train.lstm_hidden; });

        f.push_back({"train", "algo", [ctc](const RunConfig& c) { return std::string(train::algo_name(ctc(c).algo)); },
                     [tc](RunConfig& c, const std::string& v) { tc(c).algo = train::parse_algo(v); }});
        add_size("train", "n_workers", [](RunConfig& c) -> std::size_t& { return c.train.rollout.n_workers; });
        add_size("train", "steps_per_worker", [](RunConfig& c) -> std::size_t& { return c.train.rollout.steps_per_worker; });
        add_double("train", "gamma", [](RunConfig& c) -> double& { return c.train.gamma; });
        add_double("train", "lambda", [](RunConfig& c) -> double& { return c.train.lambda; });
        add_double("train", "lr", [](RunConfig& c) -> double& { return c.train.update.lr; });
        add_double("train", "clip_eps", [](RunConfig& c) -> double& { return c.train.update.clip_eps; });
        add_size("train", "epochs", [](RunConfig& c) -> std::size_t& { return c.train.update.epochs; });
        add_size("train", "n_minibatches", [](RunConfig& c) -> std::size_t& { return c.train.update.n_minibatches; });
        add_double("train", "value_coef", [](RunConfig& c) -> double& { return c.train.update.value_coef; });
        add_double("train", "entropy_coef", [](RunConfig& c) -> double& { return c.train.update.entropy_coef; });
        add_double("train", "max_grad_norm", [](RunConfig& c) -> double& { return c.train.update.max_grad_norm; });
        add_size("train", "bptt_len", [](RunConfig& c) -> std::size_t& { return c.train.update.bptt_len; });
        f.push_back({"train", "normalize_advantages",
                     [ctc](const RunConfig& c) { return std::string(ctc(c).update.normalize_advantages ? "true" : "false"); },
                     [tc](RunConfig& c, const std::string& v) { tc(c).update.normalize_advantages = to_bool(v); }});
        add_size("train", "kappa_samples", [](RunConfig& c) -> std::size_t& { return c.train.update.kappa_samples; });
        return f;
    }();
    return all;
}

const Field* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : fields())
        if (f.section == section && f.key == key) return &f;
    return nullptr;
}

void set_field(RunConfig& cfg, const std::string& section, const std::string& key, const std::string& value,
               std::size_t line) {
    const std::string name = section + "." + key;
    const Field* f = find_field(section, key);
    if (!f) throw ConfigError(line, name, "unknown key");
    try {
        f->set(cfg, value);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(line, name, e.what());
    } catch (const std::out_of_range&) {
        throw ConfigError(line, name, "value out of range");
    }
}

void check_whole(const RunConfig& cfg) {
    try {
        cfg.train.validate();
        train::net_config(cfg.train, train::make_levels(cfg.train).front()).validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(0, "", e.what());
    }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> sections;
    for (const auto& f : fields()) sections.insert(f.section);
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw, section;
    std::size_t line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::string s = trim(raw);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(line, "", "unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!sections.count(section)) throw ConfigError(line, section, "unknown section");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(line, "", "expected 'key = value'");
        if (section.empty()) throw ConfigError(line, "", "key outside of a section");
        const std::string key = trim(s.substr(0, eq));
        const std::string name = section + "." + key;
        if (!seen.insert(name).second) throw ConfigError(line, name, "duplicate key");
        set_field(cfg, section, key, trim(s.substr(eq + 1)), line);
    }
    check_whole(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, path.string(), "cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
        throw ConfigError(0, assignment, "override must look like section.key=value");
    }
    set_field(cfg, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
              trim(assignment.substr(eq + 1)), 0);
    check_whole(cfg);
}

std::string emit_config(const RunConfig& cfg) {
    std::ostringstream out;
    std::string section;
    for (const auto& f : fields()) {
        if (f.section != section) {
            if (!section.empty()) out << '\n';
            section = f.section;
            out << '[' << section << "]\n";
        }
        out << f.key << " = " << f.get(cfg) << '\n';
    }
    return out.str();
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.section + "." + f.key);
    return out;
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    const char* root = std::getenv(kOutputRootEnv);
    return std::filesystem::path(root && *root ? root : "runs") / cfg.name;
}

}  // namespace dve::cli
