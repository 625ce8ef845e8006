#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hcd/graph.hpp"
#include "hcd/simulate.hpp"

namespace hcd {

// arcs[j] runs over [tau[j], tau[j+1]] (the last arc starts at tau[N]);
// jump j (1..N) joins arcs[j-1] to arcs[j] and is a reset jump when
// reset_jump[j-1] is set, a continuous-time eps-jump otherwise.
struct EpsTChain {
    int N = 0;
    std::vector<double> tau;
    std::vector<int> eta;  // 0 followed by the indices of continuous-time jumps
    std::vector<Arc> arcs;
    std::vector<bool> reset_jump;
    double eps = 0.0;
    double T = 0.0;

    void recompute_eta();
};

struct ChainSearchOptions {
    bool nice_only = false;
    int max_expansions = 20000;
    double horizon = -1.0;  // flow time explored per hop beyond T; negative: graph T_step
};

std::optional<EpsTChain> find_chain(const HybridSystemDef& sys, const TransitionGraph& g, const State& x,
                                    const State& y, double eps, double T, const ChainSearchOptions& opt = {});

struct ChainReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

ChainReport validate_chain(const HybridSystemDef& sys, const EpsTChain& chain, double arc_tol = 1e-6);

bool is_nice_chain(const EpsTChain& chain, double T);

}  // namespace hcd
