#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "dve/diff/grad_check.hpp"
#include "dve/models/checkpoint.hpp"
#include "dve/models/cluster_metrics.hpp"
#include "dve/models/network.hpp"

using namespace dve;
using namespace dve::models;
using diff::LstmState;
using diff::ParamStore;
using diff::Shape;
using diff::Tape;
using diff::Tensor;

namespace {

NetConfig small(HeadKind head, std::size_t nb = 3) {
    NetConfig c;
    c.obs_dim = 5;
    c.n_actions = 3;
    c.encoder_hidden = 6;
    c.lstm_hidden = 4;
    c.head = head;
    c.n_basis = nb;
    c.n_control = 5;  // off the parity pairing, which only holds at H = 64
    return c;
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

CriticOutput critic_with(const NetConfig& cfg, ParamStore& ps) {
    const ActorCritic net(cfg, ps);
    return critic_values(net, std::vector<double>(cfg.lstm_hidden, 0.3));
}

}  // namespace

TEST_CASE("encode: zero parameters, determinism and trajectory dependence") {
    const auto cfg = small(HeadKind::baseline);
    ParamStore zp = ActorCritic::make_layout(cfg);
    const ActorCritic zero_net(cfg, zp);
    Rng rng(1);
    const auto obs = random_vec(cfg.obs_dim, rng);
    auto [f0, s0] = encode_values(zero_net, obs, LstmState::zeros(cfg.lstm_hidden));
    for (double v : f0) CHECK(v == 0.0);

    const ActorCritic net(cfg, 7);
    const auto a = encode_values(net, obs, LstmState::zeros(cfg.lstm_hidden));
    const auto b = encode_values(net, obs, LstmState::zeros(cfg.lstm_hidden));
    CHECK(a.first == b.first);
    LstmState other{random_vec(cfg.lstm_hidden, rng), random_vec(cfg.lstm_hidden, rng)};
    const auto c = encode_values(net, obs, other);
    double d2 = 0.0;
    for (std::size_t i = 0; i < c.first.size(); ++i) d2 += (c.first[i] - a.first[i]) * (c.first[i] - a.first[i]);
    CHECK(std::sqrt(d2) > 1e-6);
    CHECK_THROWS_AS(encode_values(net, std::vector<double>(cfg.obs_dim + 1), LstmState::zeros(cfg.lstm_hidden)),
                    diff::ShapeError);
}

TEST_CASE("actor: zero weights give a uniform policy; logits shift leaves log-probs") {
    const auto cfg = small(HeadKind::baseline);
    ParamStore ps = ActorCritic::make_layout(cfg);
    const ActorCritic net(cfg, ps);
    const auto p = actor_values(net, std::vector<double>(cfg.lstm_hidden, 1.0));
    for (double lp : p.log_probs) CHECK(lp == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));

    ActorCritic rnd(cfg, 3);
    const std::vector<double> f{0.1, -0.4, 0.7, 0.2};
    const auto before = actor_values(rnd, f);
    for (auto& v : rnd.params().get("actor.b").value.storage()) v += 5.0;
    const auto after = actor_values(rnd, f);
    for (std::size_t a = 0; a < 3; ++a) CHECK(after.log_probs[a] == doctest::Approx(before.log_probs[a]).epsilon(1e-12));
}

TEST_CASE("baseline critic: zero weights and linearity") {
    const auto cfg = small(HeadKind::baseline);
    ParamStore ps = ActorCritic::make_layout(cfg);
    CHECK(critic_with(cfg, ps).value == 0.0);
    const ActorCritic net(cfg, 9);
    const std::vector<double> x{0.3, -1.0, 2.0, 0.5}, y{-0.7, 0.2, 0.1, 1.5};
    std::vector<double> xy(4);
    for (int i = 0; i < 4; ++i) xy[i] = 2.0 * x[i] - y[i];
    const double b = critic_values(net, std::vector<double>(4, 0.0)).value;
    const double lhs = critic_values(net, xy).value - b;
    const double rhs = 2.0 * (critic_values(net, x).value - b) - (critic_values(net, y).value - b);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("dynamic critic: closed-form values") {
    {
        auto cfg = small(HeadKind::dynamic, 2);
        ParamStore ps = ActorCritic::make_layout(cfg);
        ps.get("critic.mu.b").value = Tensor::row({1.0, 3.0});
        CHECK(critic_with(cfg, ps).value == doctest::Approx(2.0).epsilon(1e-15));
    }
    {
        auto cfg = small(HeadKind::dynamic, 4);
        ParamStore ps = ActorCritic::make_layout(cfg);
        ps.get("critic.alpha.b").value = Tensor::row({std::log(0.5), std::log(0.25), std::log(0.25), -800.0});
        ps.get("critic.mu.b").value = Tensor::row({4.0, 2.0, 0.0, 100.0});
        const auto out = critic_with(cfg, ps);
        CHECK(std::abs(out.value - 2.5) <= 1e-12);
        CHECK(out.alpha->size() == 4);
        ps.get("critic.alpha.b").value = Tensor::row({0.0, 0.0, 1000.0, 0.0});
        ps.get("critic.mu.b").value = Tensor::row({4.0, 2.0, -7.0, 100.0});
        CHECK(critic_with(cfg, ps).value == -7.0);
    }
}

TEST_CASE("dynamic critic: value equals the posterior-weighted basis values") {
    const auto cfg = small(HeadKind::dynamic, 4);
    const ActorCritic net(cfg, 21);
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        const auto out = critic_values(net, random_vec(cfg.lstm_hidden, rng));
        double dot = 0.0, sum = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            dot += (*out.alpha)[k] * (*out.mu)[k];
            sum += (*out.alpha)[k];
            CHECK((*out.alpha)[k] >= 0.0);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
        CHECK(std::abs(out.value - dot) <= 1e-9);
    }
}

TEST_CASE("control critic: zero weights and parameter parity") {
    const auto cfg = small(HeadKind::control);
    ParamStore ps = ActorCritic::make_layout(cfg);
    CHECK(critic_with(cfg, ps).value == 0.0);
    // Analytic counts at H = 64: dynamic 2 * 4 * 65 = 520, control 8 * 65 + 8 + 1 = 529.
    CHECK(dynamic_head_parameter_count(64, 4) == 520);
    CHECK(control_head_parameter_count(64, 8) == 529);
    CHECK(std::abs(529.0 - 520.0) / 520.0 <= 0.02);
    NetConfig big;
    big.obs_dim = 3;
    big.n_actions = 2;
    big.head = HeadKind::control;
    std::size_t critic_params = 0;
    for (const auto& p : ActorCritic::make_layout(big))
        if (p.name.rfind("critic.", 0) == 0) critic_params += p.value.size();
    CHECK(critic_params == 529);
}

TEST_CASE("head functions reject a mismatched configuration") {
    const auto cfg = small(HeadKind::baseline);
    const ActorCritic net(cfg, 1);
    Tape tape(false);
    Binder bind(tape, net.params());
    CHECK_THROWS_AS(critic_forward_dynamic(bind, tape.constant(Tensor(Shape{1, cfg.lstm_hidden}))), std::invalid_argument);
}

TEST_CASE("grad_check through encoder, LSTM, actor and every critic head") {
    for (auto head : {HeadKind::baseline, HeadKind::dynamic, HeadKind::control}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto cfg = small(head);
            ActorCritic net(cfg, seed);
            ParamStore ps = net.params();
            Rng rng(seed + 50);
            ps.add("obs", Shape{2, cfg.obs_dim}).value.storage() = random_vec(2 * cfg.obs_dim, rng);
            ps.add("h0", Shape{2, cfg.lstm_hidden}).value.storage() = random_vec(2 * cfg.lstm_hidden, rng);
            ps.add("c0", Shape{2, cfg.lstm_hidden}).value.storage() = random_vec(2 * cfg.lstm_hidden, rng);
            const std::vector<std::size_t> actions{0, 2};
            auto f = [&](Tape& t, ParamStore& p) {
                Binder bind(t, p);
                auto next = encode(bind, bind("obs"), diff::LstmVars{bind("h0"), bind("c0")});
                auto pol = actor_forward(bind, next.hidden);
                auto crit = critic_forward(bind, cfg, next.hidden);
                return diff::add(diff::sum(diff::pick(pol.log_probs, actions)), diff::sum(diff::square(crit.value)));
            };
            const auto rep = diff::grad_check(f, ps);
            CHECK_MESSAGE(rep.passed, head_name(head) << " seed " << seed << " " << rep.worst << " " << rep.worst_error);
        }
    }
}

TEST_CASE("confusion and contribution") {
    for (std::size_t nb : {2u, 3u, 7u}) CHECK(confusion(std::vector<double>(nb, 1.0 / nb)) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(confusion(std::vector<double>{0, 0, 1, 0, 0}) == 0.2);
    CHECK(confusion(std::vector<double>{0.5, 0.5, 0, 0}) == 0.5);
    CHECK_THROWS_AS(confusion(std::vector<double>{0.5, 0.6}), std::invalid_argument);

    std::vector<std::vector<double>> uni{{0.5, 0.5}};
    auto r = contribution(uni);
    CHECK(r[0] == 0.5);
    CHECK(r[1] == 0.5);
    std::vector<std::vector<double>> hot{{1.0, 0.0}};
    r = contribution(hot);
    CHECK(r[0] == 0.5);
    CHECK(r[1] == 0.0);
    std::vector<std::vector<double>> two{{1.0, 0.0}, {0.0, 1.0}};
    r = contribution(two);
    CHECK(r[0] == 0.25);
    CHECK(r[1] == 0.25);
    CHECK_THROWS_AS(contribution(std::vector<std::vector<double>>{}), std::invalid_argument);
}

TEST_CASE("checkpoint text round trip and diagnostics") {
    Checkpoint ck;
    ck.config = small(HeadKind::dynamic);
    ck.seed = 12345678901234ULL;
    ck.update = 17;
    ck.env_steps = 4352;
    ck.params = ActorCritic(ck.config, 4).params();
    ck.extra["family"] = "gapworld";
    diff::Adam adam(ck.params);
    for (auto& p : ck.params) p.grad.fill(0.125);
    adam.step(ck.params);
    ck.optimizer = capture_optimizer(adam);
    const std::string text = serialize_checkpoint(ck);
    const Checkpoint back = parse_checkpoint(text);
    CHECK(serialize_checkpoint(back) == text);
    CHECK(back.params.flat_values() == ck.params.flat_values());
    CHECK(back.optimizer->steps == 1);

    const auto path = std::filesystem::temp_directory_path() / "dve_ckpt_test.ckpt";
    save_checkpoint(path, ck);
    CHECK(serialize_checkpoint(load_checkpoint(path)) == text);
    std::filesystem::remove(path);

    std::string broken = text;
    broken.replace(broken.find("update "), 7, "updatx ");
    try {
        parse_checkpoint(broken);
        FAIL("expected a parse error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
}
