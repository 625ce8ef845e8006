#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hcd/polynomial.hpp"

namespace hcd {

struct Box {
    Vec lo;
    Vec hi;
    int dim() const { return static_cast<int>(lo.size()); }
};

// One component of a mode's guard: the zero set of psi inside the domain,
// restricted to where every extra inequality g_i(x) <= 0 holds.
struct GuardComponent {
    Polynomial psi;
    std::vector<Polynomial> ineqs;
    int target = 0;
    PolyMap reset;
};

struct ModeSpec {
    int id = 0;
    int dim = 1;
    PolyMap field;
    Box domain;
    // Optional polynomial constraints c(x) <= 0 narrowing the domain box
    // (e.g. an energy sublevel set).
    std::vector<Polynomial> constraints;
    // Axes whose coordinate is taken modulo the domain width.
    std::vector<bool> periodic;
    std::vector<GuardComponent> guards;
};

// Modes form a disjoint union; distance between points in different modes
// is +infinity. The flow set is the domain minus the guard.
struct HybridSystemDef {
    std::string name;
    std::vector<ModeSpec> modes;

    const ModeSpec& mode(int id) const { return modes.at(static_cast<std::size_t>(id)); }
};

struct State {
    int mode = 0;
    Vec x;
};

struct Tolerances {
    double event = 1e-9;    // |psi| threshold for guard membership
    double domain = 1e-7;   // slack for domain box and constraint checks
};

bool in_domain(const HybridSystemDef& sys, const State& s, double tol = Tolerances{}.domain);
bool guard_active(const GuardComponent& g, std::span<const double> x, double event_tol);
// Index of the first guard component containing s, if any.
std::optional<int> guard_at(const HybridSystemDef& sys, const State& s, double event_tol = Tolerances{}.event);
bool on_guard(const HybridSystemDef& sys, const State& s, double event_tol = Tolerances{}.event);

// Euclidean within a mode (periodic axes use the circular distance), +inf across modes.
double distance(const HybridSystemDef& sys, const State& a, const State& b);
void wrap_periodic(const ModeSpec& m, Vec& x);
void clamp_to_box(const ModeSpec& m, Vec& x);

enum class DiagnosticKind {
    EmptyDomain,
    BadDimension,
    BadArity,
    ModeIdsNotDense,
    BadTarget,
    ResetOutOfDomain,
    InwardGuard,
    VanishingLieDerivatives,
};

struct Diagnostic {
    DiagnosticKind kind;
    int mode = -1;
    int guard = -1;
    std::string message;
    std::optional<State> where;
};

const char* to_string(DiagnosticKind kind);

// Points on a guard component, found by projecting a lattice of the domain
// box onto psi = 0 and keeping those satisfying the extra inequalities.
std::vector<Vec> sample_guard(const ModeSpec& mode, int guard_idx, int per_axis = 21,
                              double event_tol = Tolerances{}.event);

std::vector<Diagnostic> validate_system(const HybridSystemDef& sys);

}  // namespace hcd
