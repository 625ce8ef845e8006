#include <catch_amalgamated.hpp>

#include <random>

#include "hcd/builtins.hpp"
#include "hcd/chain.hpp"
#include "hcd/error.hpp"

using namespace hcd;

namespace {

TransitionGraph graph(const HybridSystemDef& sys, double h, double T_step, double window) {
    GraphParams gp;
    gp.h = h;
    gp.T_step = T_step;
    gp.window = window;
    return build_transition_graph(sys, gp);
}

State random_state(const HybridSystemDef& sys, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(sys.modes.size()) - 1);
    while (true) {
        const ModeSpec& m = sys.mode(pick(rng));
        State s{m.id, Vec(m.dim)};
        for (int i = 0; i < m.dim; ++i) {
            s.x[i] = std::uniform_real_distribution<double>(m.domain.lo[i], m.domain.hi[i])(rng);
        }
        if (in_domain(sys, s) && !on_guard(sys, s)) return s;
    }
}

}  // namespace

TEST_CASE("counterexample chains loop through both intervals") {
    const auto ce = instantiate(BuiltinId::Counterexample);
    const auto g = graph(ce, 0.01, 0.05, -1);
    const auto c = find_chain(ce, g, State{0, {-1}}, State{0, {-1}}, 0.05, 0.05);
    REQUIRE(c);
    CHECK(validate_chain(ce, *c).ok());
    CHECK(c->N >= 2);
    bool visited_upper = false;
    for (const Arc& a : c->arcs) visited_upper = visited_upper || a.mode == 1;
    CHECK(visited_upper);
    // Beyond 2 the flow always resets first, and eps-jumps may not cross the guard.
    CHECK_FALSE(find_chain(ce, g, State{0, {-0.5}}, State{1, {2.5}}, 0.05, 0.05));
}

TEST_CASE("gradient flow chains run downhill only") {
    const auto gf = instantiate(BuiltinId::GradientFlow);
    const auto g = graph(gf, 0.05, 2, 0);
    const auto down = find_chain(gf, g, State{0, {0.01, 0.3}}, State{0, {1, 0}}, 0.1, 1);
    REQUIRE(down);
    CHECK(validate_chain(gf, *down).ok());
    CHECK_FALSE(find_chain(gf, g, State{0, {1, 0}}, State{0, {0, 0}}, 0.1, 1));
    CHECK_FALSE(find_chain(gf, g, State{0, {0.5, 0.5}}, State{0, {-1, 0}}, 0.1, 1));
}

TEST_CASE("find_chain rejects bad parameters") {
    const auto ce = instantiate(BuiltinId::Counterexample);
    const auto g = graph(ce, 0.01, 0.05, -1);
    CHECK_THROWS_AS(find_chain(ce, g, State{0, {-1}}, State{0, {-1}}, 0.0, 0.05), Error);
    CHECK_THROWS_AS(find_chain(ce, g, State{0, {-7}}, State{0, {-1}}, 0.05, 0.05), Error);
}

TEST_CASE("validate_chain catches broken chains") {
    const auto ce = instantiate(BuiltinId::Counterexample);
    const auto g = graph(ce, 0.01, 0.05, -1);
    const auto c = find_chain(ce, g, State{1, {2.5}}, State{0, {-0.5}}, 0.05, 0.05);
    REQUIRE(c);
    REQUIRE(validate_chain(ce, *c).ok());

    SECTION("a jump longer than eps") {
        EpsTChain bad = *c;
        bad.arcs.back().x.back()[0] += 0.2;
        bad.arcs.back().x.front()[0] += 0.2;
        CHECK_FALSE(validate_chain(ce, bad).ok());
    }
    SECTION("continuous jumps closer than T") {
        EpsTChain bad = *c;
        bad.T = 10.0;
        CHECK_FALSE(validate_chain(ce, bad).ok());
    }
    SECTION("an arc that does not follow the flow") {
        EpsTChain bad = *c;
        for (Arc& a : bad.arcs) {
            if (a.x.size() > 2) {
                a.x[1][0] += 1e-3;
                break;
            }
        }
        CHECK_FALSE(validate_chain(ce, bad).ok());
    }
    SECTION("a reset jump taken off the guard") {
        EpsTChain bad = *c;
        bad.reset_jump.front() = true;
        bad.recompute_eta();
        CHECK_FALSE(validate_chain(ce, bad).ok());
    }
}

TEST_CASE("is_nice_chain looks at the gap before each continuous jump") {
    EpsTChain c;
    c.N = 3;
    c.tau = {0.0, 1.0, 1.2, 2.5};
    c.reset_jump = {true, false, false};
    c.recompute_eta();
    CHECK(c.eta == std::vector<int>{0, 2, 3});
    // Jump 2 follows the reset at 1.0 after only 0.2.
    CHECK_FALSE(is_nice_chain(c, 1.0));
    CHECK(is_nice_chain(c, 0.2));
    c.tau = {0.0, 1.0, 2.0, 3.0};
    CHECK(is_nice_chain(c, 1.0));
}

TEST_CASE("property: nice-only chain search agrees with the unrestricted one") {
    struct Case {
        BuiltinId id;
        double h, T_step, window, eps, T;
    };
    const Case cases[] = {
        {BuiltinId::Counterexample, 0.01, 0.05, -1, 0.05, 0.05},
        {BuiltinId::OmegaPathology, 0.005, 1, -1, 0.02, 0.05},
        {BuiltinId::BouncingBall, 0.1, 4, 0, 0.2, 0.5},
    };
    for (const Case& cs : cases) {
        const auto sys = instantiate(cs.id);
        const auto g = graph(sys, cs.h, cs.T_step, cs.window);
        std::mt19937_64 rng(4);
        int found = 0;
        for (int k = 0; k < 50; ++k) {
            const State x = random_state(sys, rng), y = random_state(sys, rng);
            const auto plain = find_chain(sys, g, x, y, cs.eps, cs.T);
            ChainSearchOptions o;
            o.nice_only = true;
            const auto nice = find_chain(sys, g, x, y, cs.eps, cs.T, o);
            INFO(to_string(cs.id) << " pair " << k);
            CHECK(plain.has_value() == nice.has_value());
            if (plain) CHECK(validate_chain(sys, *plain).ok());
            if (nice) {
                CHECK(validate_chain(sys, *nice).ok());
                CHECK(is_nice_chain(*nice, cs.T));
                ++found;
            }
        }
        CHECK(found >= 10);
    }
}
