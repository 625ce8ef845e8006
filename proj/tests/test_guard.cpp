#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>

#include "hcd/builtins.hpp"
#include "hcd/error.hpp"
#include "hcd/guard_verify.hpp"

using namespace hcd;

namespace {

Polynomial var(int i) { return Polynomial::variable(2, i); }
Polynomial cst(double c) { return Polynomial::constant(2, c); }

// A field with mixed-degree terms so higher derivatives stay nonzero.
PolyMap test_field() {
    return {var(1) + var(0) * var(0) * 0.5, var(0) * -1.0 + var(0) * var(1) * 0.25};
}

using Scalar = std::function<double(const Vec&)>;

// L_X f by central differences on a scalar callback.
Scalar fd_lie(Scalar f, const PolyMap& X, double step) {
    return [f, X, step](const Vec& x) {
        double acc = 0.0;
        const Vec v = eval(X, x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            Vec a = x, b = x;
            a[i] += step;
            b[i] -= step;
            acc += (f(a) - f(b)) / (2 * step) * v[i];
        }
        return acc;
    };
}

}  // namespace

TEST_CASE("ball guard tower") {
    const auto ball = instantiate(BuiltinId::BouncingBall, BuiltinParams{2.5, 0.8, 5.0});
    const ModeSpec& m = ball.mode(0);
    const LieTower t = lie_tower(m.field, m.guards[0].psi, 4);
    REQUIRE(t.derivatives.size() == 4);
    RationalPolynomial y(2);
    y.add_term(1, {0, 1});
    RationalPolynomial minus_g(2);
    minus_g.add_term(Rational(-5, 2), {0, 0});
    CHECK(t.derivatives[0] == y);
    CHECK(t.derivatives[1] == minus_g);
    CHECK(t.derivatives[2].is_zero());
    CHECK(t.derivatives[3].is_zero());
}

TEST_CASE("tower errors") {
    const PolyMap field = test_field();
    CHECK_THROWS_AS(lie_tower(field, var(0), 0), Error);
    try {
        lie_tower(field, var(0) * var(0) * var(0), 12, 4);
        FAIL("expected a degree overflow");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegreeOverflow);
    }
}

TEST_CASE("property: the Lie tower is linear in the guard function") {
    const PolyMap field = test_field();
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> coeff(-9, 9), e(0, 2);
    for (int trial = 0; trial < 30; ++trial) {
        Polynomial p(2), q(2);
        for (int k = 0; k < 3; ++k) {
            p.add_term(coeff(rng), {e(rng), e(rng)});
            q.add_term(coeff(rng), {e(rng), e(rng)});
        }
        // Dyadic, so the double coefficient converts exactly.
        const double c = coeff(rng) / 8.0;
        const LieTower tp = lie_tower(field, p, 4), tq = lie_tower(field, q, 4);
        const LieTower tpq = lie_tower(field, p + q * c, 4);
        for (int k = 0; k < 4; ++k) {
            INFO("trial " << trial << " order " << k + 1);
            CHECK(tpq.derivatives[k] == tp.derivatives[k] + tq.derivatives[k] * Rational(c));
        }
    }
}

TEST_CASE("property: symbolic Lie derivatives agree with nested finite differences") {
    const PolyMap field = test_field();
    const Polynomial psi = var(0) * var(0) + var(1) * 0.5 - cst(1.0);
    const LieTower t = lie_tower(field, psi, 3);
    // Three nested levels at step 1e-3 keep round-off and truncation near 1e-6.
    std::vector<Scalar> fd{[psi](const Vec& x) { return psi.eval(x); }};
    for (int k = 0; k < 3; ++k) fd.push_back(fd_lie(fd.back(), field, 1e-3));
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 100; ++i) {
        const Vec x{u(rng), u(rng)};
        for (int k = 0; k < 3; ++k) {
            const double sym = t.derivatives[k].eval(x);
            const double num = fd[k + 1](x);
            INFO("point " << i << " order " << k + 1 << " sym " << sym << " fd " << num);
            CHECK(std::abs(sym - num) <= 1e-4 * std::max(1.0, std::abs(sym)));
        }
    }
}

TEST_CASE("ball passes the criterion at its tangency point") {
    const auto ball = instantiate(BuiltinId::BouncingBall);
    const auto pts = check_lie_criterion(ball, 0, 0, 8, {Vec{0.0, 0.0}, Vec{0.0, -2.0}});
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].outcome == CriterionOutcome::Pass);
    CHECK(pts[0].order == 2);
    CHECK(pts[0].value == -1.0);
    CHECK(pts[1].outcome == CriterionOutcome::NotTangent);
    CHECK(pts[1].value == -2.0);
}

TEST_CASE("spring tower vanishes at the origin") {
    const auto spring = instantiate(BuiltinId::SpringBall);
    const auto pts = check_lie_criterion(spring, 0, 0, 8, {Vec{0.0, 0.0}});
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].outcome == CriterionOutcome::Inconclusive);
    CHECK(pts[0].order == 0);
}

TEST_CASE("criterion and mu continuity agree on the builtins") {
    for (BuiltinId id : {BuiltinId::BouncingBall, BuiltinId::SpringBall}) {
        const auto sys = instantiate(id);
        const ModeSpec& m = sys.mode(0);
        bool criterion_ok = true;
        for (const auto& p : check_lie_criterion(sys, 0, 0, 8, sample_guard(m, 0))) {
            criterion_ok = criterion_ok && (p.outcome == CriterionOutcome::NotTangent || p.outcome == CriterionOutcome::Pass);
        }
        const auto mu = check_mu_continuity(sys);
        INFO(to_string(id));
        CHECK(criterion_ok == mu.empty());
        if (id == BuiltinId::SpringBall) {
            CHECK_FALSE(criterion_ok);
            REQUIRE_FALSE(mu.empty());
            CHECK(std::abs(mu.front().mu_p - mu.front().mu_q) > 1.0);
            CHECK(distance(sys, mu.front().p, mu.front().q) < 1e-3 * 1.0001);
        } else {
            CHECK(criterion_ok);
        }
    }
}

TEST_CASE("guard verdicts and exit codes") {
    const GuardReport ball = verify_guard(instantiate(BuiltinId::BouncingBall));
    CHECK(ball.verdict == GuardVerdict::LikelyTrapping);
    CHECK(ball.boundary_violations.empty());
    REQUIRE(ball.guards.size() == 1);
    CHECK(ball.guards[0].tower.size() >= 2);

    const GuardReport spring = verify_guard(instantiate(BuiltinId::SpringBall));
    CHECK(spring.verdict == GuardVerdict::ViolationFound);
    CHECK_FALSE(spring.mu_violations.empty());

    CHECK(exit_code(GuardVerdict::LikelyTrapping) == 0);
    CHECK(exit_code(GuardVerdict::ViolationFound) == 2);
    CHECK(exit_code(GuardVerdict::Inconclusive) == 3);
}

TEST_CASE("exit boundary flags an outward field on a domain face") {
    // dx/dt = 1 on [0, 1] with the guard at x = 0: the flow leaves through x = 1.
    HybridSystemDef sys;
    ModeSpec m;
    m.dim = 1;
    m.field = {Polynomial::constant(1, 1.0)};
    m.domain = Box{{0.0}, {1.0}};
    m.periodic = {false};
    m.guards.push_back(GuardComponent{Polynomial::variable(1, 0), {}, 0, {Polynomial::constant(1, 0.5)}});
    sys.modes.push_back(m);
    const auto v = check_exit_boundary(sys);
    CHECK_FALSE(v.empty());
}
