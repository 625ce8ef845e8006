#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hcd/chain.hpp"
#include "hcd/conley.hpp"
#include "hcd/graph.hpp"
#include "hcd/simulate.hpp"

namespace hcd {

// A point of the suspension: either a base point of I, or a point (z, s) on
// the cylinder Z x [0, 1) glued at s = 0 to z and at s = 1 to r(z).
struct SuspensionPoint {
    enum class Kind { Base, Cyl };
    Kind kind = Kind::Base;
    State x;        // base point, or the guard point z
    double s = 0.0;

    static SuspensionPoint base(State x) { return {Kind::Base, std::move(x), 0.0}; }
    static SuspensionPoint cyl(State z, double s) { return {Kind::Cyl, std::move(z), s}; }
    bool is_base() const { return kind == Kind::Base; }
};

// Relaxed system: every guard hit is followed by a unit-time ride on the
// cylinder before the reset fires.
struct RelaxedSystem {
    HybridSystemDef base;
};

RelaxedSystem relax(const HybridSystemDef& sys);

SuspensionPoint embed(const State& x);

// Cyl(z, s >= 1) becomes the base point r(z); a base point on the guard
// becomes Cyl(z, 0). Throws InvalidState for Cyl(z, .) with z off the guard.
SuspensionPoint canonical(const HybridSystemDef& sys, const SuspensionPoint& p);

// Compatible metric on canonical points: Euclidean on the base, |ds| + |dz|
// on the cylinder, mixed pairs measured through either glued end.
double suspension_distance(const HybridSystemDef& sys, const SuspensionPoint& p, const SuspensionPoint& q);

struct SuspensionSegment {
    bool cylinder = false;
    double duration = 0.0;
};

struct SuspensionFlowResult {
    SuspensionPoint endpoint;
    std::vector<SuspensionSegment> segments;
};

struct PhiOptions {
    double integrator_tol = 1e-10;
    long max_segments = 1'000'000;
};

SuspensionFlowResult phi(const HybridSystemDef& sys, double t, const SuspensionPoint& p, const PhiOptions& opt = {});

// Execution of the relaxed system; cylinder rides appear as arcs with
// `cylinder` set, and each reset is recorded as a jump at the end of its ride.
ExecutionTrace relaxed_simulate(const RelaxedSystem& rs, const SuspensionPoint& s0, const SimBudget& budget = {});

struct FlowLawReport {
    int checked = 0;
    double max_error = 0.0;
    double worst_ratio = 0.0;  // largest error / allowed error
    std::vector<std::string> failures;
    bool ok() const { return failures.empty(); }
};

// Samples (p, t, s) with t + s <= t_max and compares phi(t + s, p) with
// phi(t, phi(s, p)); the allowed error is 10 tol (1 + t + s).
FlowLawReport semigroup_check(const HybridSystemDef& sys, int n_samples, std::uint64_t seed, double t_max = 20.0,
                              double tol = 1e-10);
// Samples base points x and t < mu(x), comparing phi(t, embed(x)) with the
// plain flow; the allowed error is 10 tol (1 + t).
FlowLawReport conjugacy_check(const HybridSystemDef& sys, int n_samples, std::uint64_t seed, double tol = 1e-10);

struct SuspensionSample {
    double t = 0.0;
    SuspensionPoint p;
};

// Samples of phi(t, p) for t on a uniform grid of step dt in [0, t_end].
std::vector<SuspensionSample> suspension_trace(const HybridSystemDef& sys, const SuspensionPoint& p, double t_end,
                                               double dt);

struct ClassicalReport {
    int checked = 0;
    int mismatches = 0;
    double max_base_error = 0.0;
    double max_s_error = 0.0;
    std::vector<std::string> details;
    bool ok() const { return mismatches == 0; }
};

// For a pure map (empty flow set) compares phi with the mapping torus of
// ceiling 1: phi(t, x) = (f^floor(t)(x), t - floor(t)).
ClassicalReport classical_suspension_check(const HybridSystemDef& sys, int n_samples, std::uint64_t seed,
                                           double t_max = 10.0);

struct ContinuityWitness {
    SuspensionPoint p, q;
    SuspensionPoint phi_p, phi_q;
    double input_distance = 0.0;
    double output_distance = 0.0;
};

struct ContinuityOptions {
    int n_pairs = 10000;
    double radius = 0.2;     // neighborhood of the guard to sample
    double delta = 1e-4;     // pair separation
    double t = 3.141592653589793;
    double threshold = 0.1;  // output gap that counts as a jump
    std::uint64_t seed = 1;
};

// Sampled search for a discontinuity of phi(t, .) near the guard.
std::optional<ContinuityWitness> suspension_continuity_check(const HybridSystemDef& sys,
                                                             const ContinuityOptions& opt = {});

struct CompatibilityOptions {
    int n_samples = 20;
    std::uint64_t seed = 1;
    double h = 0.05;
    double t_transient = 100.0;
    double t_window = 20.0;
    double eps = 0.3;
    double T = 0.5;
    bool check_chains = true;
    double phi_step = 1.0;  // flow time per edge of the suspension graph
};

struct CompatibilityReport {
    int omega_checked = 0;
    int chain_checked = 0;
    int chain_undecided = 0;  // suspension reaches y but the chain search found nothing
    std::vector<std::string> disagreements;
    bool ok() const { return disagreements.empty(); }
};

// Compares omega-limit boxes of H with the base part of the suspension tail,
// and chain verdicts of H with reachability in a box graph of the suspension.
// `graph` must be built for sys with resolution opt.h.
CompatibilityReport suspension_compatibility_check(const HybridSystemDef& sys, const TransitionGraph& graph,
                                                   const std::vector<State>& samples,
                                                   const CompatibilityOptions& opt = {});

// Box graph of the suspension: base boxes followed by (guard box, s-cell)
// nodes. Edges go to every node within `radius` of a sampled image
// (negative: one box layer).
struct SuspensionGraph {
    int n_base = 0;
    int n_cells = 0;                 // s-cells per guard box
    std::vector<int> guard_boxes;    // base node ids that meet the guard
    std::vector<std::vector<int>> out;

    int size() const { return static_cast<int>(out.size()); }
};

SuspensionGraph build_suspension_graph(const HybridSystemDef& sys, const TransitionGraph& g, double phi_step,
                                       double radius = -1.0);

// Suspension-graph nodes within `radius` of a point (negative: one box layer).
std::vector<int> suspension_nodes_near(const HybridSystemDef& sys, const TransitionGraph& g,
                                       const SuspensionGraph& sg, const SuspensionPoint& p, double radius = -1.0);

}  // namespace hcd
