#pragma once

#include <string>
#include <vector>

#include "hcd/system.hpp"

namespace hcd {

struct IntegratorOptions {
    double tol = 1e-10;        // relative and absolute RK45 tolerance
    double event_tol = 1e-9;   // |psi| bound at a refined guard crossing
    double domain_tol = 1e-7;
    double max_step = 0.1;
    // When positive, extra dense-output samples are recorded so that
    // consecutive arc points are at most this far apart.
    double sample_spacing = 0.0;
    bool record = true;
    // Ignore a crossing of a guard surface that starts on that surface
    // (used to continue the flow geometrically past a guard point).
    bool skip_start_surface = false;
};

struct Arc {
    int mode = 0;
    std::vector<double> t;
    std::vector<Vec> x;
    bool cylinder = false;  // a ride along Z x [0,1] in the relaxed system
};

enum class TerminalKind { GuardHit, TimeOut, DomainExit };
const char* to_string(TerminalKind k);

struct ArcResult {
    Arc arc;
    TerminalKind kind = TerminalKind::TimeOut;
    State state;
    double time = 0.0;
    int guard = -1;
};

ArcResult integrate_arc(const HybridSystemDef& sys, const State& s0, double t_max,
                        const IntegratorOptions& opt = {});

// Integrates dx/dt = field(x) for time t (negative t runs the field backwards),
// ignoring guards and domains.
Vec flow_free(const PolyMap& field, const Vec& x0, double t, double tol = 1e-12);

struct FlowTime {
    bool finite = false;
    double mu = 0.0;
};

FlowTime max_flow_time(const HybridSystemDef& sys, const State& s, double horizon,
                       const IntegratorOptions& opt = {});

State apply_reset(const HybridSystemDef& sys, const State& s, double event_tol = Tolerances{}.event);

struct SimBudget {
    double max_time = 100.0;
    int max_jumps = 200;
    int zeno_ratio_window = 8;
    double integrator_tol = 1e-10;
    double event_tol = 1e-9;
};

struct Jump {
    double time = 0.0;
    State pre;
    State post;
    int guard = -1;
};

enum class ExecClass { Infinite, Zeno, Blocked, BudgetTruncated };
const char* to_string(ExecClass c);

struct ExecutionClassification {
    ExecClass kind = ExecClass::BudgetTruncated;
    double horizon = 0.0;      // Infinite: time reached
    double stop_time = 0.0;    // Zeno: extrapolated stop time
    double zeno_ratio = 0.0;   // Zeno: fitted gap ratio
    State final_state;         // last state of the trace
    std::string reason;
};

struct ExecutionTrace {
    std::vector<Jump> jumps;
    std::vector<Arc> arcs;
    int n_jumps = 0;
    ExecutionClassification cls;

    double end_time() const;
    std::vector<double> jump_times() const;  // tau_0 = 0 followed by each jump time
};

ExecutionTrace simulate_execution(const HybridSystemDef& sys, const State& s0, const SimBudget& budget = {});

// Zeno gap test on a jump-time sequence: true and fills stop/ratio when the
// last `window` gaps decay geometrically with ratio below 0.999.
bool zeno_gap_test(const std::vector<double>& jump_times, int window, double& stop, double& ratio);

}  // namespace hcd
