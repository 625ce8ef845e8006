#include <catch_amalgamated.hpp>

#include <random>

#include "hcd/polynomial.hpp"

using namespace hcd;
using Catch::Matchers::WithinAbs;

namespace {

Polynomial x(int i) { return Polynomial::variable(2, i); }

}  // namespace

TEST_CASE("polynomial arithmetic merges like terms and drops zeros") {
    const Polynomial p = x(0) * x(0) + x(1) * 3.0 - x(0) * x(0);
    REQUIRE(p.terms().size() == 1);
    CHECK(p == x(1) * 3.0);
    CHECK((x(0) - x(0)).is_zero());
    CHECK((x(0) * x(1) * x(1)).degree() == 3);
    CHECK(Polynomial::constant(2, 0.0).is_zero());
}

TEST_CASE("polynomial eval and partial derivatives") {
    // p = 2 x^3 y - x + 5
    Polynomial p = Polynomial::monomial(2.0, {3, 1}) - x(0) + Polynomial::constant(2, 5.0);
    const std::vector<double> at{1.5, -2.0};
    CHECK_THAT(p.eval(at), WithinAbs(2 * 3.375 * -2.0 - 1.5 + 5, 1e-12));
    CHECK_THAT(p.partial(0).eval(at), WithinAbs(6 * 2.25 * -2.0 - 1, 1e-12));
    CHECK_THAT(p.partial(1).eval(at), WithinAbs(2 * 3.375, 1e-12));
    CHECK(p.partial(1).partial(1).is_zero());
}

TEST_CASE("lie derivative of the ball guard") {
    const PolyMap field{x(1), Polynomial::constant(2, -1.0)};
    const Polynomial psi = x(0);
    const Polynomial l1 = lie_derivative(psi, field);
    CHECK(l1 == x(1));
    const Polynomial l2 = lie_derivative(l1, field);
    CHECK(l2 == Polynomial::constant(2, -1.0));
    CHECK(lie_derivative(l2, field).is_zero());
}

TEST_CASE("product rule holds for random polynomials") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<int> e(0, 3);
    auto random_poly = [&] {
        Polynomial p(2);
        for (int k = 0; k < 4; ++k) p.add_term(u(rng), {e(rng), e(rng)});
        return p;
    };
    for (int trial = 0; trial < 50; ++trial) {
        const Polynomial a = random_poly(), b = random_poly();
        const std::vector<double> at{u(rng), u(rng)};
        const double lhs = (a * b).partial(0).eval(at);
        const double rhs = a.partial(0).eval(at) * b.eval(at) + a.eval(at) * b.partial(0).eval(at);
        CHECK_THAT(lhs, WithinAbs(rhs, 1e-10));
    }
}

TEST_CASE("polynomial map evaluation") {
    const PolyMap m{x(0) * x(1), x(0) + x(1)};
    const Vec v = eval(m, std::vector<double>{2.0, 3.0});
    CHECK(v == Vec{6.0, 5.0});
}
