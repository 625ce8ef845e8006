#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "hcd/builtins.hpp"
#include "hcd/error.hpp"
#include "hcd/simulate.hpp"

using namespace hcd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Reference values worked out by hand for g = 1, d = 0.8 from (0.5, 3):
// impact speed sqrt(10), first flight 3 + sqrt(10), later flights 2 sqrt(10) 0.8^k.
const double kSqrt10 = std::sqrt(10.0);
const double kBallFirstImpact = 3.0 + kSqrt10;                  // 6.16227766
const double kBallStop = 3.0 + kSqrt10 + 2 * kSqrt10 * 4.0;     // 31.46049894

State ball_state(double x, double y) { return State{0, {x, y}}; }

}  // namespace

TEST_CASE("ball arc stops on the guard at the impact point") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const ArcResult r = integrate_arc(ball, ball_state(0.5, 3), 100);
    CHECK(r.kind == TerminalKind::GuardHit);
    CHECK_THAT(r.time, WithinAbs(kBallFirstImpact, 1e-8));
    CHECK_THAT(r.state.x[0], WithinAbs(0.0, 1e-8));
    CHECK_THAT(r.state.x[1], WithinAbs(-kSqrt10, 1e-8));
}

TEST_CASE("spring arc takes a quarter turn from (1, 0)") {
    const auto spring = instantiate(BuiltinId::SpringBall);
    const ArcResult r = integrate_arc(spring, State{0, {1, 0}}, 100);
    CHECK(r.kind == TerminalKind::GuardHit);
    CHECK_THAT(r.time, WithinAbs(std::numbers::pi / 2, 1e-8));
    CHECK_THAT(r.state.x[1], WithinAbs(-1.0, 1e-8));
}

TEST_CASE("arc stops at the time limit") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const ArcResult r = integrate_arc(ball, ball_state(0.5, 3), 1.0);
    CHECK(r.kind == TerminalKind::TimeOut);
    CHECK_THAT(r.time, WithinAbs(1.0, 1e-12));
    CHECK_THAT(r.state.x[0], WithinAbs(0.5 + 3 - 0.5, 1e-8));
    CHECK_THAT(r.state.x[1], WithinAbs(2.0, 1e-8));
}

TEST_CASE("max flow time") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const FlowTime f = max_flow_time(ball, ball_state(0.5, 3), 100);
    CHECK(f.finite);
    CHECK_THAT(f.mu, WithinAbs(kBallFirstImpact, 1e-7));
    const FlowTime z = max_flow_time(ball, ball_state(0, -1), 100);
    CHECK(z.finite);
    CHECK(z.mu == 0.0);
    const auto spring = instantiate(BuiltinId::SpringBall);
    // theta = pi/4, so 3 pi / 4 until the guard.
    CHECK_THAT(max_flow_time(spring, State{0, {1, 1}}, 100).mu, WithinAbs(3 * std::numbers::pi / 4, 1e-7));
}

TEST_CASE("resets") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const State r = apply_reset(ball, ball_state(0, -2));
    CHECK(r.x == Vec{0.0, 1.6000000000000001});
    const auto ce = instantiate(BuiltinId::Counterexample);
    CHECK(apply_reset(ce, State{0, {0}}).mode == 1);
    CHECK(apply_reset(ce, State{0, {0}}).x[0] == 1.0);
    CHECK(apply_reset(ce, State{1, {3}}).x[0] == -1.0);
    CHECK(apply_reset(ce, State{1, {2}}).mode == 0);
    CHECK_THROWS_AS(apply_reset(ball, ball_state(0.5, 1)), Error);
}

TEST_CASE("ball from (0.5, 3) is Zeno with the exact stop time") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const ExecutionTrace tr = simulate_execution(ball, ball_state(0.5, 3));
    REQUIRE(tr.cls.kind == ExecClass::Zeno);
    CHECK_THAT(tr.cls.stop_time, WithinRel(kBallStop, 1e-6));
    CHECK_THAT(tr.cls.zeno_ratio, WithinAbs(0.8, 1e-3));
    const auto jt = tr.jump_times();
    REQUIRE(jt.size() > 4);
    double t = kBallFirstImpact, v = kSqrt10;
    for (int k = 1; k < 5; ++k) {
        CHECK_THAT(jt[k], WithinAbs(t, 1e-6));
        v *= 0.8;
        t += 2 * v;
    }
}

TEST_CASE("ball at rest on the floor is Zeno at time 0") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const ExecutionTrace tr = simulate_execution(ball, ball_state(0, 0));
    REQUIRE(tr.cls.kind == ExecClass::Zeno);
    CHECK_THAT(tr.cls.stop_time, WithinAbs(0.0, 1e-9));
}

TEST_CASE("elastic spring and the counterexample run forever") {
    BuiltinParams p;
    p.d = 1.0;
    const auto spring = instantiate(BuiltinId::SpringBall, p);
    CHECK(simulate_execution(spring, State{0, {1, 0}}).cls.kind == ExecClass::Infinite);
    const auto ce = instantiate(BuiltinId::Counterexample);
    CHECK(simulate_execution(ce, State{0, {-1}}).cls.kind == ExecClass::Infinite);
}

TEST_CASE("zeno gap test on a geometric sequence") {
    std::vector<double> t{0};
    double gap = 1;
    for (int k = 0; k < 30; ++k) {
        t.push_back(t.back() + gap);
        gap *= 0.5;
    }
    double stop = 0, ratio = 0;
    REQUIRE(zeno_gap_test(t, 8, stop, ratio));
    CHECK_THAT(stop, WithinAbs(2.0, 1e-8));
    CHECK_THAT(ratio, WithinAbs(0.5, 1e-9));
    std::vector<double> even{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK_FALSE(zeno_gap_test(even, 8, stop, ratio));
}

TEST_CASE("validate_system") {
    CHECK(validate_system(instantiate(BuiltinId::BouncingBall)).empty());
    CHECK(validate_system(instantiate(BuiltinId::GradientFlow)).empty());
    CHECK(validate_system(instantiate(BuiltinId::CircleRotation)).empty());
    // The spring's tangency at the origin and the counterexample's equilibrium
    // on the guard both have an identically vanishing Lie tower.
    for (auto id : {BuiltinId::SpringBall, BuiltinId::Counterexample}) {
        const auto diags = validate_system(instantiate(id));
        REQUIRE(diags.size() == 1);
        CHECK(diags[0].kind == DiagnosticKind::VanishingLieDerivatives);
        REQUIRE(diags[0].where);
        CHECK(diags[0].where->x[0] == 0.0);
    }
    auto broken = instantiate(BuiltinId::Counterexample);
    broken.modes[0].guards[0].target = 7;
    const auto diags = validate_system(broken);
    REQUIRE_FALSE(diags.empty());
    CHECK(diags[0].kind == DiagnosticKind::BadTarget);
}

TEST_CASE("property: jump times are nondecreasing from 0") {
    std::mt19937_64 rng(11);
    for (auto id : {BuiltinId::BouncingBall, BuiltinId::SpringBall, BuiltinId::Counterexample,
                    BuiltinId::OmegaPathology}) {
        const auto sys = instantiate(id);
        std::uniform_int_distribution<int> pick(0, static_cast<int>(sys.modes.size()) - 1);
        for (int k = 0; k < 20; ++k) {
            const ModeSpec& m = sys.mode(pick(rng));
            State s{m.id, Vec(m.dim)};
            for (int i = 0; i < m.dim; ++i) {
                s.x[i] = std::uniform_real_distribution<double>(m.domain.lo[i], m.domain.hi[i])(rng);
            }
            if (!in_domain(sys, s)) continue;
            SimBudget b;
            b.max_time = 30;
            b.max_jumps = 60;
            const auto jt = simulate_execution(sys, s, b).jump_times();
            REQUIRE(jt.front() == 0.0);
            for (std::size_t j = 1; j < jt.size(); ++j) CHECK(jt[j] >= jt[j - 1]);
        }
    }
}

TEST_CASE("property: mu cocycle") {
    std::mt19937_64 rng(5);
    const double tol = IntegratorOptions{}.tol;
    for (auto id : {BuiltinId::BouncingBall, BuiltinId::SpringBall}) {
        const auto sys = instantiate(id);
        const ModeSpec& m = sys.mode(0);
        int checked = 0;
        while (checked < 50) {
            State s{0, {std::uniform_real_distribution<double>(m.domain.lo[0], m.domain.hi[0])(rng),
                        std::uniform_real_distribution<double>(m.domain.lo[1], m.domain.hi[1])(rng)}};
            if (!in_domain(sys, s) || on_guard(sys, s)) continue;
            const FlowTime f = max_flow_time(sys, s, 100);
            if (!f.finite || f.mu < 1e-6) continue;
            const double t = std::uniform_real_distribution<double>(0, f.mu)(rng);
            const ArcResult a = integrate_arc(sys, s, t);
            const FlowTime g = max_flow_time(sys, a.state, 100);
            REQUIRE(g.finite);
            CHECK(std::abs(f.mu - t - g.mu) < 10 * tol * (1 + f.mu));
            ++checked;
        }
    }
}

TEST_CASE("property: guard points are never flow points") {
    std::mt19937_64 rng(9);
    for (auto id : {BuiltinId::BouncingBall, BuiltinId::SpringBall, BuiltinId::Counterexample}) {
        const auto sys = instantiate(id);
        for (const ModeSpec& m : sys.modes) {
            for (int gi = 0; gi < static_cast<int>(m.guards.size()); ++gi) {
                for (const Vec& z : sample_guard(m, gi)) {
                    const State s{m.id, z};
                    CHECK(on_guard(sys, s));
                    const FlowTime f = max_flow_time(sys, s, 10);
                    CHECK(f.finite);
                    CHECK(f.mu == 0.0);
                }
            }
            for (int k = 0; k < 50; ++k) {
                State s{m.id, Vec(m.dim)};
                for (int i = 0; i < m.dim; ++i) {
                    s.x[i] = std::uniform_real_distribution<double>(m.domain.lo[i], m.domain.hi[i])(rng);
                }
                if (!in_domain(sys, s) || on_guard(sys, s)) continue;
                CHECK(max_flow_time(sys, s, 10).mu > 0.0);
            }
        }
    }
}

TEST_CASE("property: ball energy is constant along each arc") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const double tol = SimBudget{}.integrator_tol;
    const ExecutionTrace tr = simulate_execution(ball, ball_state(0.5, 3));
    REQUIRE(tr.arcs.size() > 5);
    for (const Arc& arc : tr.arcs) {
        if (arc.x.empty()) continue;
        const double e0 = 0.5 * arc.x.front()[1] * arc.x.front()[1] + arc.x.front()[0];
        for (const Vec& x : arc.x) CHECK(std::abs(0.5 * x[1] * x[1] + x[0] - e0) < 10 * tol * (1 + e0));
    }
}

TEST_CASE("property: every recorded jump starts on the guard and follows the reset") {
    for (auto id : {BuiltinId::BouncingBall, BuiltinId::Counterexample, BuiltinId::OmegaPathology}) {
        const auto sys = instantiate(id);
        const State s0 = id == BuiltinId::BouncingBall ? ball_state(0.5, 3)
                       : id == BuiltinId::Counterexample ? State{1, {1.5}}
                                                          : State{0, {-2.5}};
        const ExecutionTrace tr = simulate_execution(sys, s0);
        REQUIRE_FALSE(tr.jumps.empty());
        for (const Jump& j : tr.jumps) {
            const GuardComponent& g = sys.mode(j.pre.mode).guards.at(j.guard);
            CHECK(std::abs(g.psi.eval(j.pre.x)) < SimBudget{}.event_tol);
            const State r = apply_reset(sys, j.pre);
            CHECK(r.mode == j.post.mode);
            CHECK(r.x == j.post.x);
        }
    }
}
