#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "hcd/builtins.hpp"
#include "hcd/conley.hpp"
#include "hcd/io.hpp"
#include "hcd/lyapunov.hpp"

using namespace hcd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

// Time to the floor for a ball at height x with upward speed y.
double ball_mu_ref(double x, double y, double g) { return (y + std::sqrt(y * y + 2 * g * x)) / g; }

// Clockwise angle from (x, y), x > 0, to the negative y-axis.
double spring_mu_ref(double x, double y) { return std::atan2(y, x) + kPi / 2; }

// Uniform draws from the energy sublevel E <= E0 inside the domain, off the guard.
State ball_state(std::mt19937_64& rng, double E0, double g) {
    std::uniform_real_distribution<double> u(0, 1);
    while (true) {
        const double x = u(rng) * E0 / g, y = (2 * u(rng) - 1) * std::sqrt(2 * E0);
        if (y * y / 2 + g * x <= E0 && x > 1e-6) return State{0, {x, y}};
    }
}

State spring_state(std::mt19937_64& rng, double E0) {
    std::uniform_real_distribution<double> u(0, 1);
    const double r = std::sqrt(2 * E0);
    while (true) {
        const double x = u(rng) * r, y = (2 * u(rng) - 1) * r;
        if ((x * x + y * y) / 2 <= E0 && x > 1e-6) return State{0, {x, y}};
    }
}

}  // namespace

TEST_CASE("flow time to the guard matches the closed forms") {
    std::mt19937_64 rng(31);
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const auto spring = instantiate(BuiltinId::SpringBall);
    for (int i = 0; i < 200; ++i) {
        const State b = ball_state(rng, 5.0, 1.0);
        const FlowTime fb = max_flow_time(ball, b, 100);
        REQUIRE(fb.finite);
        INFO("ball (" << b.x[0] << ", " << b.x[1] << ")");
        CHECK_THAT(fb.mu, WithinRel(ball_mu_ref(b.x[0], b.x[1], 1.0), 1e-5));
        CHECK_THAT(oracle::ball_mu(b.x[0], b.x[1], 1.0), WithinRel(ball_mu_ref(b.x[0], b.x[1], 1.0), 1e-12));

        const State s = spring_state(rng, 5.0);
        const FlowTime fs = max_flow_time(spring, s, 100);
        REQUIRE(fs.finite);
        INFO("spring (" << s.x[0] << ", " << s.x[1] << ")");
        CHECK_THAT(fs.mu, WithinRel(spring_mu_ref(s.x[0], s.x[1]), 1e-5));
        CHECK_THAT(oracle::spring_mu(s.x[0], s.x[1]), WithinRel(spring_mu_ref(s.x[0], s.x[1]), 1e-12));
    }
}

TEST_CASE("ball Lyapunov candidate decreases with the predicted reset margin") {
    const BuiltinParams p{1.0, 0.8, 5.0};
    const auto ball = instantiate(BuiltinId::BouncingBall, p);
    const LyapunovCandidate c = stock_candidate(BuiltinId::BouncingBall, p);
    const double b = 1.4, a = 0.999 * (1 - 0.8) / (2 * std::sqrt(2.0) * 0.8) * b;
    CHECK_THAT(c.b, WithinAbs(b, 1e-15));
    CHECK_THAT(c.a, WithinRel(a, 1e-14));
    const LyapunovReport r = verify_lyapunov(ball, c, recurrence_oracle(BuiltinId::BouncingBall, p));
    CHECK(r.pass());
    CHECK(r.flow_checked > 0);
    CHECK(r.worst_flow_margin < 0);
    CHECK(r.worst_reset_margin < 0);
    REQUIRE_FALSE(r.resets.empty());
    for (const ResetSample& s : r.resets) {
        const double expect = (a * 2 * 0.8 - b * (1 - 0.8) / std::sqrt(2.0)) * std::abs(s.z.x[1]);
        CHECK_THAT(s.margin, WithinAbs(expect, 1e-9));
    }
}

TEST_CASE("spring Lyapunov candidate decreases with the predicted reset margin") {
    const BuiltinParams p{1.0, 0.8, 5.0};
    const auto spring = instantiate(BuiltinId::SpringBall, p);
    const LyapunovCandidate c = stock_candidate(BuiltinId::SpringBall, p);
    const double a = 0.9 * (1 - 0.8) * c.b / (0.8 * kPi);
    CHECK_THAT(c.a, WithinRel(a, 1e-14));
    const LyapunovReport r = verify_lyapunov(spring, c, recurrence_oracle(BuiltinId::SpringBall, p));
    CHECK(r.pass());
    CHECK(r.worst_flow_margin < 0);
    CHECK(r.worst_reset_margin < 0);
    REQUIRE_FALSE(r.resets.empty());
    for (const ResetSample& s : r.resets) {
        const double rho = std::hypot(s.z.x[0], s.z.x[1]);
        CHECK_THAT(s.margin, WithinAbs((a * 0.8 * kPi + c.b * (0.8 - 1)) * rho, 1e-9));
    }
}

TEST_CASE("a constant is a Lyapunov function only without dissipation") {
    BuiltinParams elastic;
    elastic.d = 1.0;
    const auto ball1 = instantiate(BuiltinId::BouncingBall, elastic);
    CHECK(verify_lyapunov(ball1, constant_candidate(2.0), recurrence_oracle(BuiltinId::BouncingBall, elastic)).pass());
    const BuiltinParams lossy;
    const auto ball = instantiate(BuiltinId::BouncingBall, lossy);
    CHECK_FALSE(verify_lyapunov(ball, constant_candidate(2.0), recurrence_oracle(BuiltinId::BouncingBall, lossy)).pass());
}

TEST_CASE("omega pathology at box level") {
    const auto om = instantiate(BuiltinId::OmegaPathology);
    const double h = 0.005;

    SECTION("the omega limit of -1 is the box at 0") {
        const auto boxes = omega_limit_estimate(om, State{1, {-1.0}}, h);
        REQUIRE_FALSE(boxes.empty());
        for (const BoxKey& k : boxes) CHECK(k.mode == 1);
        const State z{1, {0.0}};
        CHECK(on_guard(om, z));
        const State r = apply_reset(om, z);
        CHECK(r.mode == 2);
        CHECK(r.x[0] == 1.0);
    }

    SECTION("recurrent boxes and the escaping orbit") {
        GraphParams gp;
        gp.h = h;
        gp.T_step = 1;
        const TransitionGraph g = build_transition_graph(om, gp);
        const ChainClassSet c = chain_recurrent_boxes(g);
        auto recurrent_at = [&](const State& s) {
            for (int v : g.nodes_containing(s)) {
                if (c.node_recurrent[v]) return true;
            }
            return false;
        };
        for (double x : {-2.9, -2.5, -2.0}) CHECK(recurrent_at(State{0, {x}}));
        CHECK(recurrent_at(State{2, {1.0}}));
        CHECK_FALSE(recurrent_at(State{1, {-1.0}}));
        CHECK_FALSE(recurrent_at(State{1, {-0.5}}));

        // -2 resets to -3, which sits on the second guard and leaves for -1 in mode 1.
        const State a = apply_reset(om, State{0, {-2.0}});
        CHECK(a.mode == 0);
        CHECK(a.x[0] == -3.0);
        const State b = apply_reset(om, a);
        CHECK(b.mode == 1);
        CHECK(b.x[0] == -1.0);
        CHECK(recurrent_at(a));
        CHECK_FALSE(recurrent_at(b));
    }
}

TEST_CASE("counterexample executions never block") {
    const auto ce = instantiate(BuiltinId::Counterexample);
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 50; ++i) {
        const State s = i % 2 == 0 ? State{0, {-u(rng)}} : State{1, {1 + 2 * u(rng)}};
        SimBudget budget;
        budget.max_time = 30;
        const ExecutionTrace tr = simulate_execution(ce, s, budget);
        INFO("mode " << s.mode << " x " << s.x[0]);
        CHECK(tr.cls.kind == ExecClass::Infinite);
    }
}

TEST_CASE("oracle reports") {
    for (const std::string& name : builtin_names()) {
        const Json j = oracle_report(parse_builtin(name), BuiltinParams{});
        INFO(name);
        CHECK(j.contains("builtin"));
        CHECK(j.contains("recurrent_set"));
        CHECK(j["version"] == tool_version());
    }
    const Json ball = oracle_report(BuiltinId::BouncingBall, BuiltinParams{});
    CHECK(ball.contains("mu_table"));
    CHECK(ball.contains("stop_time"));
    CHECK(ball.contains("lyapunov"));
}
