#include "dve/models/network.hpp"

#include <cmath>
#include <stdexcept>

namespace dve::models {

using diff::LstmState;
using diff::LstmVars;
using diff::ParamStore;
using diff::Shape;
using diff::Tape;
using diff::Tensor;
using diff::Var;

const char* head_name(HeadKind h) noexcept {
    switch (h) {
        case HeadKind::baseline: return "baseline";
        case HeadKind::dynamic: return "dynamic";
        case HeadKind::control: return "control";
    }
    return "?";
}

HeadKind parse_head(const std::string& name) {
    if (name == "baseline") return HeadKind::baseline;
    if (name == "dynamic") return HeadKind::dynamic;
    if (name == "control") return HeadKind::control;
    throw std::invalid_argument("unknown critic head '" + name + "'");
}

void NetConfig::validate() const {
    if (obs_dim < 1 || n_actions < 1 || encoder_hidden < 1 || lstm_hidden < 1) {
        throw std::invalid_argument("NetConfig: all dimensions must be >= 1");
    }
    if (head == HeadKind::dynamic && n_basis < 2) throw std::invalid_argument("NetConfig: dynamic head needs N_b >= 2");
    if (head == HeadKind::control && n_control < 1) throw std::invalid_argument("NetConfig: control head needs N_c >= 1");
}

std::size_t dynamic_head_parameter_count(std::size_t h, std::size_t nb) { return 2 * (h + 1) * nb; }
std::size_t control_head_parameter_count(std::size_t h, std::size_t nc) { return (h + 1) * nc + nc + 1; }

// ---- ActorCritic --------------------------------------------------------------

ParamStore ActorCritic::make_layout(const NetConfig& cfg) {
    cfg.validate();
    const std::size_t E = cfg.encoder_hidden, H = cfg.lstm_hidden;
    ParamStore ps;
    ps.add("encoder.w", Shape{cfg.obs_dim, E});
    ps.add("encoder.b", Shape{1, E});
    ps.add("lstm.w", Shape{E + H, 4 * H});
    ps.add("lstm.b", Shape{1, 4 * H});
    ps.add("actor.w", Shape{H, cfg.n_actions});
    ps.add("actor.b", Shape{1, cfg.n_actions});
    switch (cfg.head) {
        case HeadKind::baseline:
            ps.add("critic.w", Shape{H, 1});
            ps.add("critic.b", Shape{1, 1});
            break;
        case HeadKind::dynamic:
            ps.add("critic.alpha.w", Shape{H, cfg.n_basis});
            ps.add("critic.alpha.b", Shape{1, cfg.n_basis});
            ps.add("critic.mu.w", Shape{H, cfg.n_basis});
            ps.add("critic.mu.b", Shape{1, cfg.n_basis});
            break;
        case HeadKind::control:
            ps.add("critic.hidden.w", Shape{H, cfg.n_control});
            ps.add("critic.hidden.b", Shape{1, cfg.n_control});
            ps.add("critic.out.w", Shape{cfg.n_control, 1});
            ps.add("critic.out.b", Shape{1, 1});
            break;
    }
    return ps;
}

namespace {

void check_control_parity(const NetConfig& cfg) {
    if (cfg.head != HeadKind::control || cfg.n_control != 2 * cfg.n_basis) return;
    const auto dyn = static_cast<double>(dynamic_head_parameter_count(cfg.lstm_hidden, cfg.n_basis));
    const auto ctl = static_cast<double>(control_head_parameter_count(cfg.lstm_hidden, cfg.n_control));
    if (std::abs(ctl - dyn) / dyn > 0.02) {
        throw std::invalid_argument("NetConfig: control head has " + std::to_string(static_cast<long>(ctl)) +
                                    " parameters vs " + std::to_string(static_cast<long>(dyn)) +
                                    " for the dynamic head (more than 2% apart)");
    }
}

}  // namespace

ActorCritic::ActorCritic(const NetConfig& cfg, std::uint64_t seed) : cfg_(cfg), params_(make_layout(cfg)) {
    check_control_parity(cfg_);
    Rng rng(derive_seed(seed, "init"));
    for (auto& p : params_) {
        // Weights are [fan_in x fan_out]; a bias uses the fan-in of its weight.
        const std::string& n = p.name;
        std::size_t fan_in = p.value.rows();
        if (n.size() >= 2 && n.compare(n.size() - 2, 2, ".b") == 0) {
            fan_in = params_.get(n.substr(0, n.size() - 2) + ".w").value.rows();
        }
        ParamStore::init_uniform(p.value, fan_in, rng);
    }
}

ActorCritic::ActorCritic(const NetConfig& cfg, ParamStore params) : cfg_(cfg), params_(make_layout(cfg)) {
    check_control_parity(cfg_);
    if (params.size() != params_.size()) throw std::invalid_argument("ActorCritic: parameter count does not match config");
    for (auto& p : params_) {
        const auto& src = params.get(p.name);
        if (src.value.shape() != p.value.shape()) {
            diff::throw_shape_mismatch(("ActorCritic(" + p.name + ")").c_str(), p.value.shape(), src.value.shape());
        }
        p.value = src.value;
    }
}

std::vector<std::string> ActorCritic::trunk_parameter_names() const {
    return {"encoder.w", "encoder.b", "lstm.w", "lstm.b"};
}

std::vector<std::string> ActorCritic::actor_parameter_names() const { return {"actor.w", "actor.b"}; }

std::vector<std::string> ActorCritic::critic_parameter_names() const {
    std::vector<std::string> out;
    for (const auto& p : params_)
        if (p.name.rfind("critic.", 0) == 0) out.push_back(p.name);
    return out;
}

std::vector<std::string> ActorCritic::policy_parameter_names() const {
    auto out = trunk_parameter_names();
    for (auto& n : actor_parameter_names()) out.push_back(n);
    return out;
}

// ---- Binder -------------------------------------------------------------------

Binder::Binder(Tape& tape, ParamStore& params, std::set<std::string> trainable)
    : tape_(&tape), mutable_(&params), const_(&params), trainable_(std::move(trainable)), cache_(params.size()) {
    for (const auto& p : params) names_.push_back(p.name);
}

Binder::Binder(Tape& tape, const ParamStore& params) : tape_(&tape), const_(&params), cache_(params.size()) {
    for (const auto& p : params) names_.push_back(p.name);
}

Var Binder::operator()(const std::string& name) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] != name) continue;
        if (!cache_[i]) {
            const bool grad = mutable_ && tape_->tracking() && (trainable_.empty() || trainable_.count(name) != 0);
            cache_[i] = grad ? tape_->parameter((*mutable_)[i]) : tape_->reference((*const_)[i].value);
        }
        return *cache_[i];
    }
    throw std::invalid_argument("Binder: no parameter '" + name + "' in this network");
}

// ---- forward ------------------------------------------------------------------

LstmVars encode(Binder& bind, Var obs, LstmVars state, EncodeTrace* trace) {
    const Shape ws = bind("encoder.w").shape();
    if (obs.shape().cols != ws.rows) diff::throw_shape_mismatch("encode(obs)", obs.shape(), ws);
    Var pre = diff::affine(obs, bind("encoder.w"), bind("encoder.b"));
    Var x = diff::tanh(pre);
    Var gates;
    LstmVars next = diff::lstm_step(x, state, bind("lstm.w"), bind("lstm.b"), &gates);
    if (trace) *trace = {pre, x, gates};
    return next;
}

PolicyVars actor_forward(Binder& bind, Var features) {
    Var logits = diff::affine(features, bind("actor.w"), bind("actor.b"));
    return {logits, diff::log_softmax(logits)};
}

CriticVars critic_forward_baseline(Binder& bind, Var features) {
    return {diff::affine(features, bind("critic.w"), bind("critic.b")), {}, {}};
}

CriticVars critic_forward_dynamic(Binder& bind, Var features) {
    Var alpha = diff::softmax(diff::affine(features, bind("critic.alpha.w"), bind("critic.alpha.b")));
    Var mu = diff::affine(features, bind("critic.mu.w"), bind("critic.mu.b"));
    return {diff::row_sum(diff::mul(alpha, mu)), alpha, mu};
}

CriticVars critic_forward_control(Binder& bind, Var features) {
    Var hidden = diff::relu(diff::affine(features, bind("critic.hidden.w"), bind("critic.hidden.b")));
    return {diff::affine(hidden, bind("critic.out.w"), bind("critic.out.b")), {}, {}};
}

CriticVars critic_forward(Binder& bind, const NetConfig& cfg, Var features) {
    switch (cfg.head) {
        case HeadKind::baseline: return critic_forward_baseline(bind, features);
        case HeadKind::dynamic: return critic_forward_dynamic(bind, features);
        case HeadKind::control: return critic_forward_control(bind, features);
    }
    throw std::invalid_argument("critic_forward: unknown head");
}

PolicyOutput policy_row(const PolicyVars& p, std::size_t row) {
    const std::size_t a = p.logits.shape().cols;
    auto l = p.logits.value().subspan(row * a, a);
    auto lp = p.log_probs.value().subspan(row * a, a);
    return {{l.begin(), l.end()}, {lp.begin(), lp.end()}};
}

CriticOutput critic_row(const CriticVars& c, std::size_t row) {
    CriticOutput out;
    out.value = c.value.value()[row];
    if (c.alpha.valid()) {
        const std::size_t nb = c.alpha.shape().cols;
        auto al = c.alpha.value().subspan(row * nb, nb);
        auto mu = c.mu.value().subspan(row * nb, nb);
        out.alpha = std::vector<double>(al.begin(), al.end());
        out.mu = std::vector<double>(mu.begin(), mu.end());
    }
    return out;
}

namespace {

LstmVars state_vars(Tape& tape, const LstmState& state) {
    const Shape s{1, state.size()};
    return {tape.constant(s, state.hidden), tape.constant(s, state.cell)};
}

LstmState state_values(const LstmVars& v) {
    auto h = v.hidden.value();
    auto c = v.cell.value();
    return {{h.begin(), h.end()}, {c.begin(), c.end()}};
}

}  // namespace

StepOutput infer_step(const ActorCritic& net, std::span<const double> obs, const LstmState& state) {
    const auto& cfg = net.config();
    if (obs.size() != cfg.obs_dim) {
        diff::throw_shape_mismatch("infer_step(obs)", Shape{1, obs.size()}, Shape{1, cfg.obs_dim});
    }
    if (state.size() != cfg.lstm_hidden) {
        diff::throw_shape_mismatch("infer_step(state)", Shape{1, state.size()}, Shape{1, cfg.lstm_hidden});
    }
    Tape tape(false);
    Binder bind(tape, net.params());
    LstmVars next = encode(bind, tape.constant(Shape{1, obs.size()}, obs), state_vars(tape, state));
    PolicyVars pol = actor_forward(bind, next.hidden);
    CriticVars crit = critic_forward(bind, cfg, next.hidden);
    return {policy_row(pol, 0), critic_row(crit, 0), state_values(next)};
}

std::pair<std::vector<double>, LstmState> encode_values(const ActorCritic& net, std::span<const double> obs,
                                                        const LstmState& state) {
    Tape tape(false);
    Binder bind(tape, net.params());
    LstmVars next = encode(bind, tape.constant(Shape{1, obs.size()}, obs), state_vars(tape, state));
    auto f = next.hidden.value();
    return {{f.begin(), f.end()}, state_values(next)};
}

PolicyOutput actor_values(const ActorCritic& net, std::span<const double> features) {
    Tape tape(false);
    Binder bind(tape, net.params());
    return policy_row(actor_forward(bind, tape.constant(Shape{1, features.size()}, features)), 0);
}

CriticOutput critic_values(const ActorCritic& net, std::span<const double> features) {
    Tape tape(false);
    Binder bind(tape, net.params());
    return critic_row(critic_forward(bind, net.config(), tape.constant(Shape{1, features.size()}, features)), 0);
}

}  // namespace dve::models
