#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hcd/builtins.hpp"
#include "hcd/conley.hpp"
#include "hcd/system.hpp"

namespace hcd {

enum class CandidateKind { BallStock, SpringStock, Constant };

// Closed-form scalar field on I. For BallStock L = a mu + b sqrt(E),
// for SpringStock L = a rho mu + b rho, for Constant L = c.
struct LyapunovCandidate {
    CandidateKind kind = CandidateKind::Constant;
    double a = 0.0, b = 0.0, g = 1.0, c = 0.0;

    double operator()(const State& s) const;
    std::string describe() const;
};

// Stock constants for the ball or spring; BadParameter for other builtins.
LyapunovCandidate stock_candidate(BuiltinId id, const BuiltinParams& p);
LyapunovCandidate constant_candidate(double c);

// Description of the chain recurrent set used to decide which checks apply.
struct RecurrenceOracle {
    std::function<bool(const State&)> recurrent;
    std::function<int(const State&)> class_of;  // only called on recurrent points
    std::vector<State> representatives;         // extra points checked for class constancy
    std::string description;
};

RecurrenceOracle recurrence_oracle(BuiltinId id, const BuiltinParams& p);
// Recurrence read off a box graph: a point is recurrent if some box containing it is.
RecurrenceOracle recurrence_from_boxes(const TransitionGraph& g, const ChainClassSet& c);

struct LyapunovOptions {
    int n_samples = 1000;
    std::uint64_t seed = 1;
    double flow_dt = 0.25;     // longest flow segment per sample
    double class_tol = 1e-9;   // allowed spread of L on one class
};

struct ResetSample {
    State z;
    double margin = 0.0;  // L(r(z)) - L(z)
};

struct LyapunovReport {
    int flow_checked = 0;
    int reset_checked = 0;
    int class_checked = 0;
    double worst_flow_margin = -std::numeric_limits<double>::infinity();   // max of (L(phi_t x) - L(x)) / t
    double worst_reset_margin = -std::numeric_limits<double>::infinity();  // max of L(r(z)) - L(z)
    double max_class_spread = 0.0;
    std::vector<ResetSample> resets;
    std::vector<std::string> failures;
    bool pass() const { return failures.empty(); }
};

LyapunovReport verify_lyapunov(const HybridSystemDef& sys, const LyapunovCandidate& cand,
                               const RecurrenceOracle& rec, const LyapunovOptions& opt = {});

}  // namespace hcd
