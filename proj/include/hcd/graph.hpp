#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hcd/simulate.hpp"
#include "hcd/system.hpp"

namespace hcd {

struct BoxKey {
    int mode = 0;
    std::vector<int> idx;

    auto operator<=>(const BoxKey&) const = default;
    bool operator==(const BoxKey&) const = default;
};

// Uniform grid of side h over every mode's domain box. Cells are closed and
// meet only on faces; the last cell along an axis is clipped to the domain.
class BoxGrid {
public:
    BoxGrid() = default;
    BoxGrid(const HybridSystemDef& sys, double h);

    double h() const { return h_; }
    int n_modes() const { return static_cast<int>(counts_.size()); }
    const std::vector<int>& counts(int mode) const { return counts_.at(mode); }
    std::size_t cells(int mode) const;
    std::size_t total_cells() const;

    Box cell_box(const BoxKey& k) const;
    Vec cell_center(const BoxKey& k) const;
    // Cell whose half-open extent contains x, clamped to the grid.
    BoxKey cell_of(const State& s) const;
    std::size_t linear(const BoxKey& k) const;
    BoxKey unlinear(int mode, std::size_t lin) const;
    bool periodic(int mode, int axis) const;

private:
    double h_ = 0.0;
    std::vector<Vec> lo_;
    std::vector<Vec> hi_;
    std::vector<std::vector<int>> counts_;
    std::vector<std::vector<bool>> periodic_;
};

enum class EdgeKind { Flow, Reset, Cross, Pass };
const char* to_string(EdgeKind k);

struct Edge {
    int src = 0;
    int dst = 0;
    EdgeKind kind = EdgeKind::Flow;

    auto operator<=>(const Edge&) const = default;
};

struct GraphParams {
    double h = 0.05;
    double T_step = 0.1;
    int samples_per_box = 0;    // extra jittered samples on top of the 3^dim lattice
    double bloat_pad = -1.0;    // negative means "use h"
    std::uint64_t seed = 0;
    std::size_t max_cells = 5'000'000;
    int threads = 0;            // 0: HC_THREADS or hardware concurrency
    double integrator_tol = 1e-10;
    int max_reset_chain = 16;   // resets followed per sample before giving up
    double window = -1.0;       // extra flow time after T_step covered by edges; negative means T_step

    double pad() const { return bloat_pad < 0 ? h : bloat_pad; }
    double flow_window() const { return window < 0 ? T_step : window; }
};

// Nodes are the grid boxes with at least one sample in the domain. Flow and
// Reset edges are the chain edges; Cross edges record eps-jumps across a
// guard surface, which chains may not take but trapping sets must absorb.
// Pass edges mark boxes an execution runs through before T has elapsed: a
// chain may end there, though it may not jump from there.
struct TransitionGraph {
    BoxGrid grid;
    GraphParams params;
    std::vector<BoxKey> nodes;
    std::vector<Edge> edges;                  // sorted, unique
    std::vector<std::vector<int>> chain_out;  // Flow + Reset successors
    std::vector<std::vector<int>> all_out;    // Flow, Reset and Cross successors
    std::vector<std::vector<int>> pass_out;   // Pass successors
    std::vector<bool> guard_box;              // some sample lies on a guard
    std::vector<bool> reset_undefined;        // a sampled reset left the target domain

    int size() const { return static_cast<int>(nodes.size()); }
    int find(const BoxKey& k) const;  // -1 if not a node
    // Nodes whose closed box contains s (within a small slack).
    std::vector<int> nodes_containing(const State& s) const;
    // Nodes whose box lies within distance r of s.
    std::vector<int> nodes_near(const State& s, double r) const;
    bool has_self_edge(int u) const;

    std::vector<std::vector<int>> lookup;  // per mode: linear cell index -> node id or -1
};

TransitionGraph build_transition_graph(const HybridSystemDef& sys, const GraphParams& params);

// Graph-level reachability over chain edges (all_edges selects every kind).
std::vector<bool> reachable_from(const TransitionGraph& g, const std::vector<int>& sources, bool all_edges);

int thread_count(int requested);

}  // namespace hcd
