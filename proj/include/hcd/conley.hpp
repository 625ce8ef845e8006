#pragma once

#include <optional>
#include <set>
#include <vector>

#include "hcd/graph.hpp"

namespace hcd {

struct ChainClassSet {
    std::vector<int> scc_of;                  // node -> SCC id
    std::vector<std::vector<int>> sccs;       // SCC id -> sorted nodes
    std::vector<bool> scc_recurrent;
    std::vector<int> recurrent_sccs;          // ids of recurrent SCCs, ascending
    std::vector<bool> node_recurrent;

    int n_recurrent_nodes() const;
};

// SCCs of the chain edges; a class is recurrent if it has two or more nodes
// or a self edge.
ChainClassSet chain_recurrent_boxes(const TransitionGraph& g);

struct AttractorRepellerPair {
    std::vector<int> attractor;
    std::vector<int> repeller;
    std::vector<int> trapping;
    bool trivial = false;
};

std::vector<AttractorRepellerPair> conley_pairs(const TransitionGraph& g, const ChainClassSet& c, int cap = 20);

struct BoxLyapunov {
    std::vector<double> value;  // per node
    std::vector<int> level;     // per SCC
};

BoxLyapunov build_box_lyapunov(const TransitionGraph& g, const ChainClassSet& c);

enum class ObstructionEdge { StrictFlow, StrictReset, ChainEq };
const char* to_string(ObstructionEdge k);

struct ObstructionWitness {
    struct Step {
        State point;
        ObstructionEdge edge;  // kind of the edge leaving this point
    };
    std::vector<Step> cycle;  // the last step's edge returns to the first point
    bool contains_strict = false;
};

// Guard samples, their reset images, and one representative per recurrent class.
std::vector<State> default_probes(const HybridSystemDef& sys, const TransitionGraph& g, const ChainClassSet& c);

std::optional<ObstructionWitness> lyapunov_obstruction(const HybridSystemDef& sys, const TransitionGraph& g,
                                                       const ChainClassSet& c, const std::vector<State>& probes);

struct OmegaOptions {
    double t_transient = 50.0;
    double t_window = 20.0;
    int max_jumps = 400;
    int zeno_tail = 10;
};

// Grid cells visited by the tail of the execution from x0.
std::set<BoxKey> omega_limit_estimate(const HybridSystemDef& sys, const State& x0, double h,
                                      const OmegaOptions& opt = {});

}  // namespace hcd
