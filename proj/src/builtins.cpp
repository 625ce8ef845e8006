#include "hcd/builtins.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "hcd/error.hpp"

namespace hcd {

namespace {

using P = Polynomial;

P var(int n, int i, double c = 1.0) { return P::variable(n, i, c); }
P cst(int n, double c) { return P::constant(n, c); }

// Ball-like mode: guard x = 0 with y <= 0, reset (0, -d y).
ModeSpec impact_mode(PolyMap field, Box box, P energy_constraint, double d) {
    ModeSpec m;
    m.id = 0;
    m.dim = 2;
    m.field = std::move(field);
    m.domain = std::move(box);
    m.constraints.push_back(std::move(energy_constraint));
    GuardComponent g;
    g.psi = var(2, 0);
    g.ineqs.push_back(var(2, 1));
    g.target = 0;
    g.reset = {P(2), var(2, 1, -d)};
    m.guards.push_back(std::move(g));
    return m;
}

ModeSpec line_mode(int id, double lo, double hi, P field) {
    ModeSpec m;
    m.id = id;
    m.dim = 1;
    m.field = {std::move(field)};
    m.domain = Box{{lo}, {hi}};
    return m;
}

GuardComponent point_guard(P psi, int target, double image) {
    GuardComponent g;
    g.psi = std::move(psi);
    g.target = target;
    g.reset = {cst(1, image)};
    return g;
}

void check_params(const BuiltinParams& p) {
    if (!(p.g > 0)) throw Error(ErrorKind::BadParameter, "g must be positive");
    if (!(p.d >= 0 && p.d <= 1)) throw Error(ErrorKind::BadParameter, "d must lie in [0, 1]");
    if (!(p.E0 > 0)) throw Error(ErrorKind::BadParameter, "E0 must be positive");
}

}  // namespace

BuiltinId parse_builtin(const std::string& id) {
    if (id == "ball") return BuiltinId::BouncingBall;
    if (id == "spring") return BuiltinId::SpringBall;
    if (id == "counterexample") return BuiltinId::Counterexample;
    if (id == "omega") return BuiltinId::OmegaPathology;
    if (id == "rotation") return BuiltinId::CircleRotation;
    if (id == "gradientflow") return BuiltinId::GradientFlow;
    throw Error(ErrorKind::BadParameter, "unknown builtin '" + id + "'");
}

const char* to_string(BuiltinId id) {
    switch (id) {
        case BuiltinId::BouncingBall: return "ball";
        case BuiltinId::SpringBall: return "spring";
        case BuiltinId::Counterexample: return "counterexample";
        case BuiltinId::OmegaPathology: return "omega";
        case BuiltinId::CircleRotation: return "rotation";
        case BuiltinId::GradientFlow: return "gradientflow";
    }
    return "unknown";
}

std::vector<std::string> builtin_names() {
    return {"ball", "spring", "counterexample", "omega", "rotation", "gradientflow"};
}

HybridSystemDef instantiate(BuiltinId id, const BuiltinParams& p) {
    HybridSystemDef sys;
    sys.name = to_string(id);
    switch (id) {
        case BuiltinId::BouncingBall: {
            check_params(p);
            const double ymax = std::sqrt(2 * p.E0);
            // 1/2 y^2 + g x - E0 <= 0
            P energy = var(2, 1) * var(2, 1) * 0.5 + var(2, 0, p.g) + cst(2, -p.E0);
            sys.modes.push_back(impact_mode({var(2, 1), cst(2, -p.g)}, Box{{0, -ymax}, {p.E0 / p.g, ymax}},
                                            std::move(energy), p.d));
            break;
        }
        case BuiltinId::SpringBall: {
            check_params(p);
            const double r = std::sqrt(2 * p.E0);
            P energy = (var(2, 0) * var(2, 0) + var(2, 1) * var(2, 1)) * 0.5 + cst(2, -p.E0);
            sys.modes.push_back(
                impact_mode({var(2, 1), var(2, 0, -1.0)}, Box{{0, -r}, {r, r}}, std::move(energy), p.d));
            break;
        }
        case BuiltinId::Counterexample: {
            ModeSpec a = line_mode(0, -1, 0, var(1, 0, -1.0));
            a.guards.push_back(point_guard(var(1, 0, -1.0), 1, 1.0));
            ModeSpec b = line_mode(1, 1, 3, cst(1, 1.0));
            b.guards.push_back(point_guard(cst(1, 2.0) - var(1, 0), 0, -1.0));
            b.guards.push_back(point_guard(cst(1, 3.0) - var(1, 0), 0, -1.0));
            sys.modes = {std::move(a), std::move(b)};
            break;
        }
        case BuiltinId::OmegaPathology: {
            ModeSpec a = line_mode(0, -3, -2, cst(1, 1.0));
            a.guards.push_back(point_guard(cst(1, -2.0) - var(1, 0), 0, -3.0));
            a.guards.push_back(point_guard(var(1, 0) + cst(1, 3.0), 1, -1.0));
            ModeSpec b = line_mode(1, -1, 0, var(1, 0, -1.0));
            b.guards.push_back(point_guard(var(1, 0, -1.0), 2, 1.0));
            ModeSpec c = line_mode(2, 1, 1, P(1));
            sys.modes = {std::move(a), std::move(b), std::move(c)};
            break;
        }
        case BuiltinId::CircleRotation: {
            // Pure map: the whole circle is guard, so no time passes between jumps.
            ModeSpec m = line_mode(0, 0, 1, P(1));
            m.periodic = {true};
            GuardComponent g;
            g.psi = P(1);
            g.target = 0;
            g.reset = {var(1, 0) + cst(1, p.alpha)};
            m.guards.push_back(std::move(g));
            sys.modes.push_back(std::move(m));
            break;
        }
        case BuiltinId::GradientFlow: {
            ModeSpec m;
            m.id = 0;
            m.dim = 2;
            P x = var(2, 0);
            m.field = {x - x * x * x, var(2, 1, -1.0)};
            m.domain = Box{{-1.5, -1.5}, {1.5, 1.5}};
            sys.modes.push_back(std::move(m));
            break;
        }
    }
    return sys;
}

namespace oracle {

double ball_impact_speed(double x, double y, double g) { return std::sqrt(y * y + 2 * g * x); }

double ball_mu(double x, double y, double g) { return (y + ball_impact_speed(x, y, g)) / g; }

double ball_stop_time(double x, double y, double g, double d) {
    const double v = ball_impact_speed(x, y, g);
    if (d >= 1.0) return v == 0.0 ? ball_mu(x, y, g) : std::numeric_limits<double>::infinity();
    return ball_mu(x, y, g) + 2 * v * d / (g * (1 - d));
}

double ball_stop_time_series(double x, double y, double g, double d) {
    const double v = ball_impact_speed(x, y, g);
    if (d >= 1.0) return std::numeric_limits<double>::infinity();
    return 2 * v / (g * (1 - d));
}

std::vector<double> ball_jump_times(double x, double y, double g, double d, int n) {
    std::vector<double> out;
    double t = ball_mu(x, y, g);
    double v = ball_impact_speed(x, y, g);
    for (int k = 0; k < n; ++k) {
        out.push_back(t);
        v *= d;
        t += 2 * v / g;
    }
    return out;
}

double ball_energy(double x, double y, double g) { return 0.5 * y * y + g * x; }

double spring_mu(double x, double y) { return std::atan2(y, x) + std::numbers::pi / 2; }

double ball_lyapunov(double x, double y, double a, double b, double g) {
    return a * ball_mu(x, y, g) + b * std::sqrt(std::max(0.0, ball_energy(x, y, g)));
}

double ball_default_b() { return 7.0 / 5.0; }

double ball_default_a(double g, double d, double b) {
    return 0.999 * (1 - d) * g / (2 * std::numbers::sqrt2 * d) * b;
}

double ball_reset_margin(double y, double a, double b, double g, double d) {
    return (a * 2 * d / g - b * (1 - d) / std::numbers::sqrt2) * std::abs(y);
}

double spring_lyapunov(double x, double y, double a, double b) {
    const double rho = std::hypot(x, y);
    return a * rho * spring_mu(x, y) + b * rho;
}

double spring_default_a(double d, double b) { return 0.9 * (1 - d) * b / (d * std::numbers::pi); }

double spring_reset_margin(double rho, double a, double b, double d) {
    return (a * d * std::numbers::pi + b * (d - 1)) * rho;
}

}  // namespace oracle

}  // namespace hcd
