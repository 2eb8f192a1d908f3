#include "dve/envs/level.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dve/textio.hpp"

namespace dve::envs {

const char* family_name(Family f) noexcept { return f == Family::tabular ? "tabular" : "gapworld"; }

Family parse_family(const std::string& name) {
    if (name == "tabular") return Family::tabular;
    if (name == "gapworld") return Family::gapworld;
    throw std::invalid_argument("unknown level family '" + name + "'");
}

// ---- LevelHandle ------------------------------------------------------------

std::size_t LevelHandle::obs_dim() const {
    if (family == Family::tabular) return spec.n_states;
    return (2 * GapworldParams::kWindowRadius + 1) * 3 + 1;
}

std::vector<double> LevelHandle::observe(std::size_t state) const {
    if (state >= spec.n_states) throw std::out_of_range("observe: state out of range");
    std::vector<double> obs(obs_dim(), 0.0);
    if (family == Family::tabular) {
        obs[state] = 1.0;
        return obs;
    }
    const auto radius = static_cast<std::ptrdiff_t>(GapworldParams::kWindowRadius);
    const auto len = static_cast<std::ptrdiff_t>(cells.size());
    std::size_t k = 0;
    for (std::ptrdiff_t d = -radius; d <= radius; ++d, k += 3) {
        const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(state) + d;
        if (c < 0 || c >= len) {
            obs[k + 2] = 1.0;
        } else if (cells[static_cast<std::size_t>(c)] == Cell::gap) {
            obs[k] = 1.0;
        } else if (cells[static_cast<std::size_t>(c)] == Cell::obstacle) {
            obs[k + 1] = 1.0;
        }
    }
    obs[k] = static_cast<double>(state) / static_cast<double>(cells.size() - 1);
    return obs;
}

std::size_t LevelHandle::sample_start(Rng& rng) const { return rng.categorical(spec.start_dist); }

bool LevelHandle::is_goal(std::size_t state) const {
    return family == Family::gapworld && state + 1 == cells.size();
}

std::size_t LevelHandle::optimal_path_length() const {
    if (family != Family::gapworld) throw std::logic_error("optimal_path_length: gapworld levels only");
    const std::size_t n = cells.size();
    std::vector<std::size_t> dist(n, std::numeric_limits<std::size_t>::max());
    std::deque<std::size_t> queue{0};
    dist[0] = 0;
    while (!queue.empty()) {
        const std::size_t p = queue.front();
        queue.pop_front();
        if (p + 1 == n) return dist[p];
        if (cells[p] == Cell::gap) continue;
        for (std::size_t target : {p + 1, std::min(p + 2, n - 1)}) {
            std::size_t land = cells[target] == Cell::obstacle ? p : target;
            if (cells[land] == Cell::gap || dist[land] != std::numeric_limits<std::size_t>::max()) continue;
            dist[land] = dist[p] + 1;
            queue.push_back(land);
        }
    }
    throw std::logic_error("optimal_path_length: goal unreachable");
}

// ---- generation -------------------------------------------------------------

namespace {

/// Fills one half [lo, hi) with k hazards, no two adjacent.
void place_hazards(std::vector<Cell>& cells, std::size_t lo, std::size_t hi, std::size_t k, Rng& rng) {
    const std::size_t n = hi - lo;
    if (k == 0) return;
    if (k > (n + 1) / 2) throw std::invalid_argument("gapworld: too many hazards for the level length");
    std::vector<std::size_t> pos;
    for (;;) {
        pos.clear();
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = lo + i;
        for (std::size_t i = 0; i < k; ++i) {
            const std::size_t j = i + rng.uniform_int(n - i);
            std::swap(pool[i], pool[j]);
            pos.push_back(pool[i]);
        }
        std::sort(pos.begin(), pos.end());
        bool ok = true;
        for (std::size_t i = 1; i < pos.size(); ++i) ok = ok && pos[i] - pos[i - 1] > 1;
        if (ok) break;
    }
    // One in three hazards is an obstacle; the rest are gaps.
    std::vector<Cell> types(k, Cell::gap);
    for (std::size_t i = 0; i < k / 3; ++i) types[i] = Cell::obstacle;
    for (std::size_t i = k; i-- > 1;) std::swap(types[i], types[rng.uniform_int(i + 1)]);
    for (std::size_t i = 0; i < k; ++i) cells[pos[i]] = types[i];
}

void add_outcome(MdpSpec& spec, const std::vector<Cell>& cells, const GapworldParams& gp, std::size_t p,
                 std::size_t a, std::size_t target, double prob) {
    const std::size_t goal = cells.size() - 1;
    std::size_t land = target;
    double rew = gp.step_reward;
    if (cells[target] == Cell::obstacle) {
        land = p;
    } else if (cells[target] == Cell::gap) {
        rew = 0.0;
    } else if (target == goal) {
        rew = gp.goal_reward;
    }
    spec.transition[spec.index(p, a, land)] += prob;
    spec.reward[spec.index(p, a, land)] = rew;
}

}  // namespace

LevelHandle generate_gapworld(std::uint64_t seed, const GapworldParams& gp) {
    if (gp.length < 8) throw std::invalid_argument("gapworld: length must be at least 8");
    Rng rng(derive_seed(seed, "gapworld"));
    LevelHandle lvl;
    lvl.family = Family::gapworld;
    lvl.seed = seed;
    lvl.archetype = static_cast<int>(seed & 1U);
    const double density = lvl.archetype == 0 ? gp.sparse_density : gp.dense_density;

    const std::size_t len = gp.length;
    const std::size_t mid = len / 2;
    lvl.cells.assign(len, Cell::empty);
    // Cells 0, 1, mid and the goal stay empty; each half gets the same
    // hazard count so the mid-level cell always faces the same load.
    for (auto [lo, hi] : {std::pair{std::size_t{2}, mid}, std::pair{mid + 1, len - 1}}) {
        const std::size_t k = static_cast<std::size_t>(std::lround(density * static_cast<double>(hi - lo)));
        place_hazards(lvl.cells, lo, hi, std::max<std::size_t>(k, 1), rng);
    }
    lvl.jump_slip = std::clamp(gp.slip_mean + gp.slip_stddev * rng.normal(), 0.02, 0.4);

    MdpSpec& spec = lvl.spec;
    spec.n_states = len;
    spec.n_actions = 2;
    spec.gamma = gp.gamma;
    spec.transition.assign(len * 2 * len, 0.0);
    spec.reward.assign(len * 2 * len, 0.0);
    spec.start_dist.assign(len, 0.0);
    spec.start_dist[0] = 1.0;
    for (std::size_t p = 0; p < len; ++p) {
        if (lvl.cells[p] == Cell::gap || p == len - 1) {
            spec.terminal.push_back(p);
            for (std::size_t a = 0; a < 2; ++a) spec.transition[spec.index(p, a, p)] = 1.0;
            continue;
        }
        add_outcome(spec, lvl.cells, gp, p, kWalk, p + 1, 1.0);
        add_outcome(spec, lvl.cells, gp, p, kJump, std::min(p + 2, len - 1), 1.0 - lvl.jump_slip);
        add_outcome(spec, lvl.cells, gp, p, kJump, p + 1, lvl.jump_slip);
    }
    spec.validate();
    return lvl;
}

LevelHandle generate_tabular(std::uint64_t seed, const TabularParams& tp) {
    if (tp.n_states < 2 || tp.n_actions < 1) throw std::invalid_argument("tabular: need >= 2 states and >= 1 action");
    Rng rng(derive_seed(seed, "tabular"));
    LevelHandle lvl;
    lvl.family = Family::tabular;
    lvl.seed = seed;
    MdpSpec& spec = lvl.spec;
    const std::size_t S = tp.n_states, A = tp.n_actions;
    const std::size_t term = S - 1;
    spec.n_states = S;
    spec.n_actions = A;
    spec.gamma = tp.gamma;
    spec.transition.assign(S * A * S, 0.0);
    spec.reward.assign(S * A * S, 0.0);
    spec.terminal = {term};
    for (std::size_t s = 0; s < S; ++s) {
        for (std::size_t a = 0; a < A; ++a) {
            if (s == term) {
                spec.transition[spec.index(s, a, s)] = 1.0;
                continue;
            }
            std::vector<double> w(S);
            double total = 0.0;
            for (auto& v : w) {
                v = 0.05 + rng.uniform();
                total += v;
            }
            double acc = 0.0;
            for (std::size_t s2 = 0; s2 + 1 < S; ++s2) {
                spec.transition[spec.index(s, a, s2)] = w[s2] / total;
                acc += w[s2] / total;
            }
            spec.transition[spec.index(s, a, S - 1)] = 1.0 - acc;
            for (std::size_t s2 = 0; s2 < S; ++s2) spec.reward[spec.index(s, a, s2)] = rng.uniform(-1.0, 1.0);
        }
    }
    spec.start_dist.assign(S, 1.0 / static_cast<double>(S - 1));
    spec.start_dist[term] = 0.0;
    spec.validate();
    return lvl;
}

LevelHandle generate_level(Family family, std::uint64_t seed) {
    switch (family) {
        case Family::tabular: return generate_tabular(seed, TabularParams{});
        case Family::gapworld: return generate_gapworld(seed, GapworldParams{});
    }
    throw std::invalid_argument("generate_level: unknown family");
}

LevelHandle level_from_spec(MdpSpec spec, std::uint64_t seed) {
    spec.validate();
    LevelHandle lvl;
    lvl.family = Family::tabular;
    lvl.seed = seed;
    lvl.spec = std::move(spec);
    return lvl;
}

std::vector<LevelHandle> generate_level_set(Family family, std::uint64_t base_seed, std::size_t count) {
    std::vector<LevelHandle> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(generate_level(family, base_seed + i));
    return out;
}

// ---- dynamics ---------------------------------------------------------------

StepResult step(const LevelHandle& level, std::size_t state, std::size_t action, Rng& rng) {
    const MdpSpec& spec = level.spec;
    if (state >= spec.n_states || action >= spec.n_actions) throw std::out_of_range("step: state or action out of range");
    if (spec.is_terminal(state)) throw std::logic_error("step: state " + std::to_string(state) + " is terminal");
    const std::size_t next = rng.categorical(spec.row(state, action));
    StepResult out;
    out.next_state = next;
    out.transition.obs = level.observe(state);
    out.transition.action = action;
    out.transition.reward = spec.r(state, action, next);
    out.transition.next_obs = level.observe(next);
    out.transition.done = spec.is_terminal(next);
    return out;
}

TabularPolicy gapworld_reference_policy(const LevelHandle& level) {
    if (level.family != Family::gapworld) throw std::invalid_argument("reference policy: gapworld levels only");
    const std::size_t n = level.cells.size();
    TabularPolicy pol{n, 2, std::vector<double>(n * 2, 0.0)};
    auto cell = [&](std::size_t i) { return i < n ? level.cells[i] : Cell::empty; };
    for (std::size_t p = 0; p < n; ++p) {
        double jump = 0.3;
        if (cell(p + 1) != Cell::empty) {
            jump = 0.8;
        } else if (cell(p + 2) == Cell::gap) {
            jump = 0.1;
        }
        pol.probs[p * 2 + kWalk] = 1.0 - jump;
        pol.probs[p * 2 + kJump] = jump;
    }
    return pol;
}

// ---- text format ------------------------------------------------------------

namespace {

constexpr const char* kMagic = "dve-level 1";

std::map<std::string, std::string> read_fields(std::istream& in) {
    std::map<std::string, std::string> f;
    std::string line;
    while (std::getline(in, line)) {
        if (line == "end") return f;
        if (line.empty()) continue;
        const auto sp = line.find(' ');
        const std::string key = line.substr(0, sp);
        f[key] = sp == std::string::npos ? "" : line.substr(sp + 1);
    }
    throw std::invalid_argument("import_level: missing 'end'");
}

const std::string& field(const std::map<std::string, std::string>& f, const std::string& k) {
    auto it = f.find(k);
    if (it == f.end()) throw std::invalid_argument("import_level: missing field '" + k + "'");
    return it->second;
}

LevelHandle parse_one(std::istream& in) {
    auto f = read_fields(in);
    const Family fam = parse_family(field(f, "family"));
    const std::uint64_t seed = std::stoull(field(f, "seed"));
    const int archetype = std::stoi(field(f, "archetype"));
    if (fam == Family::gapworld) {
        GapworldParams gp;
        gp.length = std::stoull(field(f, "length"));
        LevelHandle lvl = generate_gapworld(seed, gp);
        if (lvl.archetype != archetype) throw std::invalid_argument("import_level: archetype does not match seed");
        return lvl;
    }
    MdpSpec spec;
    spec.n_states = std::stoull(field(f, "n_states"));
    spec.n_actions = std::stoull(field(f, "n_actions"));
    spec.gamma = textio::parse_double(field(f, "gamma"));
    for (double v : textio::split_doubles(field(f, "terminal"))) spec.terminal.push_back(static_cast<std::size_t>(v));
    spec.start_dist = textio::split_doubles(field(f, "start_dist"));
    spec.transition = textio::split_doubles(field(f, "transition"));
    spec.reward = textio::split_doubles(field(f, "reward"));
    LevelHandle lvl = level_from_spec(std::move(spec), seed);
    lvl.archetype = archetype;
    return lvl;
}

}  // namespace

std::string export_level(const LevelHandle& level) {
    std::ostringstream out;
    out << kMagic << '\n';
    out << "family " << family_name(level.family) << '\n';
    out << "seed " << level.seed << '\n';
    out << "archetype " << level.archetype << '\n';
    if (level.family == Family::gapworld) {
        out << "length " << level.cells.size() << '\n';
    } else {
        const MdpSpec& s = level.spec;
        out << "n_states " << s.n_states << '\n';
        out << "n_actions " << s.n_actions << '\n';
        out << "gamma " << textio::exact(s.gamma) << '\n';
        out << "terminal";
        for (auto t : s.terminal) out << ' ' << t;
        out << '\n';
        out << "start_dist " << textio::join_exact(s.start_dist) << '\n';
        out << "transition " << textio::join_exact(s.transition) << '\n';
        out << "reward " << textio::join_exact(s.reward) << '\n';
    }
    out << "end\n";
    return out.str();
}

LevelHandle import_level(const std::string& text) {
    std::istringstream in(text);
    std::string header;
    std::getline(in, header);
    if (header != kMagic) throw std::invalid_argument("import_level: bad header '" + header + "'");
    return parse_one(in);
}

std::string export_level_set(const std::vector<LevelHandle>& levels) {
    std::string out;
    for (const auto& l : levels) out += export_level(l);
    return out;
}

std::vector<LevelHandle> import_level_set(const std::string& text) {
    std::istringstream in(text);
    std::vector<LevelHandle> out;
    std::string header;
    while (std::getline(in, header)) {
        if (header.empty()) continue;
        if (header != kMagic) throw std::invalid_argument("import_level_set: bad header '" + header + "'");
        out.push_back(parse_one(in));
    }
    return out;
}

}  // namespace dve::envs
