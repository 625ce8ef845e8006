#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hcd/builtins.hpp"
#include "hcd/error.hpp"
#include "hcd/suspension.hpp"

using namespace hcd;
using Catch::Matchers::WithinAbs;

TEST_CASE("canonical form glues the cylinder ends") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const State z{0, {0.0, -2.0}};
    const SuspensionPoint top = canonical(ball, SuspensionPoint::cyl(z, 1.0));
    REQUIRE(top.is_base());
    CHECK_THAT(top.x.x[0], WithinAbs(0.0, 1e-12));
    CHECK_THAT(top.x.x[1], WithinAbs(1.6, 1e-12));

    const SuspensionPoint bottom = canonical(ball, embed(z));
    REQUIRE_FALSE(bottom.is_base());
    CHECK(bottom.s == 0.0);

    const SuspensionPoint inside = SuspensionPoint::cyl(z, 0.25);
    CHECK_THAT(suspension_distance(ball, inside, SuspensionPoint::cyl(z, 0.75)), WithinAbs(0.5, 1e-12));
    CHECK(suspension_distance(ball, inside, inside) == 0.0);
    CHECK_THROWS_AS(canonical(ball, SuspensionPoint::cyl(State{0, {1.0, 0.0}}, 0.5)), Error);
}

TEST_CASE("phi moves along the cylinder at unit speed") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    for (int k = 0; k < 100; ++k) {
        const State z{0, {0.0, -0.1 - 2.9 * u(rng)}};
        const double s = u(rng), t = (1 - s) * u(rng);
        const auto r = phi(ball, t, SuspensionPoint::cyl(z, s));
        REQUIRE_FALSE(r.endpoint.is_base());
        CHECK(r.endpoint.x.x == z.x);
        CHECK_THAT(r.endpoint.s, WithinAbs(s + t, 1e-15));
    }
}

TEST_CASE("property: suspension flow is a semigroup and conjugate to the base flow") {
    for (BuiltinId id : {BuiltinId::BouncingBall, BuiltinId::SpringBall, BuiltinId::Counterexample}) {
        const auto sys = instantiate(id);
        INFO(to_string(id));
        const FlowLawReport semi = semigroup_check(sys, 100, 5);
        CHECK(semi.checked == 100);
        CHECK(semi.ok());
        const FlowLawReport conj = conjugacy_check(sys, 100, 6);
        CHECK(conj.checked == 100);
        CHECK(conj.ok());
    }
}

TEST_CASE("relaxed ball runs forever with unit gaps between resets") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const ExecutionTrace tr = relaxed_simulate(relax(ball), embed(State{0, {0.5, 3.0}}));
    CHECK(tr.cls.kind == ExecClass::Infinite);
    REQUIRE(tr.jumps.size() >= 30);
    for (std::size_t i = 1; i < tr.jumps.size(); ++i) {
        CHECK(tr.jumps[i].time - tr.jumps[i - 1].time >= 1.0 - 1e-6);
    }
    // Impact k of the plain ball is at 3 + sqrt(10) + 2 sqrt(10) (d + ... + d^(k-1));
    // each earlier ride and the current one add a unit each.
    const double v = std::sqrt(10.0);
    const double impacts[] = {3 + v, 3 + v + 2 * v * 0.8, 3 + v + 2 * v * (0.8 + 0.64)};
    for (int k = 0; k < 3; ++k) CHECK_THAT(tr.jumps[k].time, WithinAbs(impacts[k] + k + 1, 1e-8));
    bool rode = false;
    for (const Arc& a : tr.arcs) rode = rode || a.cylinder;
    CHECK(rode);
}

TEST_CASE("map suspension reduces to the mapping torus") {
    const auto rot = instantiate(BuiltinId::CircleRotation);
    const ClassicalReport rep = classical_suspension_check(rot, 100, 9);
    // Three fixed edge cases run ahead of the random samples.
    CHECK(rep.checked == 103);
    CHECK(rep.ok());
    CHECK(rep.max_s_error == 0.0);
    CHECK(rep.max_base_error <= 1e-12);

    // Independent check: x -> x + alpha mod 1, so after time 2.5 the base is x + 2 alpha.
    const double alpha = BuiltinParams{}.alpha;
    const auto r = phi(rot, 2.5, embed(State{0, {0.1}}));
    REQUIRE_FALSE(r.endpoint.is_base());
    CHECK_THAT(r.endpoint.s, WithinAbs(0.5, 1e-15));
    CHECK_THAT(r.endpoint.x.x[0], WithinAbs(std::fmod(0.1 + 2 * alpha, 1.0), 1e-12));
}

TEST_CASE("sampled continuity check near the guard") {
    ContinuityOptions o;
    o.n_pairs = 10000;
    const auto spring_w = suspension_continuity_check(instantiate(BuiltinId::SpringBall), o);
    REQUIRE(spring_w);
    CHECK(spring_w->input_distance <= o.delta * 1.0001);
    CHECK(spring_w->output_distance > o.threshold);
    CHECK_FALSE(suspension_continuity_check(instantiate(BuiltinId::BouncingBall), o));
}

TEST_CASE("omega limits and chains agree between the ball and its suspension") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    CompatibilityOptions o;
    o.n_samples = 6;
    o.h = 0.1;
    GraphParams gp;
    gp.h = o.h;
    gp.T_step = 4;
    gp.window = 0;
    const TransitionGraph g = build_transition_graph(ball, gp);
    const std::vector<State> samples{{0, {0.5, 3.0}}, {0, {2.0, 0.0}}, {0, {0.2, -1.0}}, {0, {1.0, 1.0}}};
    const CompatibilityReport rep = suspension_compatibility_check(ball, g, samples, o);
    INFO((rep.disagreements.empty() ? std::string() : rep.disagreements.front()));
    CHECK(rep.omega_checked == 4);
    CHECK(rep.chain_checked > 0);
    CHECK(rep.ok());
}
