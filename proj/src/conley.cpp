#include "hcd/conley.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>

#include "hcd/error.hpp"

namespace hcd {

int ChainClassSet::n_recurrent_nodes() const {
    return static_cast<int>(std::count(node_recurrent.begin(), node_recurrent.end(), true));
}

namespace {

// Iterative Tarjan; components come out sinks-first.
void tarjan(const std::vector<std::vector<int>>& adj, ChainClassSet& c) {
    const int n = static_cast<int>(adj.size());
    c.scc_of.assign(n, -1);
    c.sccs.clear();
    std::vector<int> index(n, -1), low(n, 0), stack;
    std::vector<bool> on_stack(n, false);
    std::vector<std::pair<int, std::size_t>> call;  // node, next successor position
    int counter = 0;
    for (int root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        call.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on_stack[root] = true;
        while (!call.empty()) {
            auto& [u, pos] = call.back();
            const auto& succ = adj[u];
            if (pos < succ.size()) {
                const int v = succ[pos++];
                if (index[v] < 0) {
                    index[v] = low[v] = counter++;
                    stack.push_back(v);
                    on_stack[v] = true;
                    call.push_back({v, 0});
                } else if (on_stack[v]) {
                    low[u] = std::min(low[u], index[v]);
                }
                continue;
            }
            const int done = u;
            call.pop_back();
            if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
            if (low[done] == index[done]) {
                std::vector<int> comp;
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    c.scc_of[w] = static_cast<int>(c.sccs.size());
                    comp.push_back(w);
                } while (w != done);
                std::sort(comp.begin(), comp.end());
                c.sccs.push_back(std::move(comp));
            }
        }
    }
}

void mark_recurrent(const TransitionGraph& g, ChainClassSet& c) {
    c.scc_recurrent.assign(c.sccs.size(), false);
    c.recurrent_sccs.clear();
    c.node_recurrent.assign(g.size(), false);
    for (std::size_t k = 0; k < c.sccs.size(); ++k) {
        const auto& comp = c.sccs[k];
        const bool rec = comp.size() >= 2 || g.has_self_edge(comp[0]);
        c.scc_recurrent[k] = rec;
        if (!rec) continue;
        c.recurrent_sccs.push_back(static_cast<int>(k));
        for (int u : comp) c.node_recurrent[u] = true;
    }
}

}  // namespace

ChainClassSet chain_recurrent_boxes(const TransitionGraph& g) {
    const int n = g.size();
    ChainClassSet c;
    tarjan(g.chain_out, c);
    mark_recurrent(g, c);
    if (g.pass_out.empty()) return c;

    // A chain may end partway along an arc. A Pass edge u -> v therefore
    // closes a cycle whenever v reaches u over chain edges. The closing edge
    // is not itself a chain edge, so reachability uses chain edges only.
    const int m = static_cast<int>(c.sccs.size());
    const std::size_t words = (static_cast<std::size_t>(m) + 63) / 64;
    std::vector<std::uint64_t> reach(static_cast<std::size_t>(m) * words, 0);
    auto row = [&](int k) { return reach.data() + static_cast<std::size_t>(k) * words; };
    std::vector<int> stamp(m, -1);
    // Sinks come first, so every successor row is final when k is reached.
    for (int k = 0; k < m; ++k) {
        std::uint64_t* rk = row(k);
        rk[k / 64] |= std::uint64_t{1} << (k % 64);
        for (int u : c.sccs[k]) {
            for (int v : g.chain_out[u]) {
                const int j = c.scc_of[v];
                if (j == k || stamp[j] == k) continue;
                stamp[j] = k;
                const std::uint64_t* rj = row(j);
                for (std::size_t w = 0; w < words; ++w) rk[w] |= rj[w];
            }
        }
    }
    std::vector<std::vector<int>> adj = g.chain_out;
    bool closed = false;
    for (int u = 0; u < n; ++u) {
        const int ku = c.scc_of[u];
        for (int v : g.pass_out[u]) {
            const int kv = c.scc_of[v];
            if (kv == ku || !(row(kv)[ku / 64] >> (ku % 64) & 1)) continue;
            adj[u].push_back(v);
            closed = true;
        }
    }
    if (!closed) return c;
    tarjan(adj, c);
    mark_recurrent(g, c);
    return c;
}

namespace {

std::vector<std::vector<int>> reverse_all(const TransitionGraph& g) {
    std::vector<std::vector<int>> rev(g.size());
    for (int u = 0; u < g.size(); ++u) {
        for (int v : g.all_out[u]) rev[v].push_back(u);
    }
    return rev;
}

std::vector<bool> bfs(const std::vector<std::vector<int>>& adj, const std::vector<bool>& start) {
    std::vector<bool> seen = start;
    std::deque<int> q;
    for (int u = 0; u < static_cast<int>(start.size()); ++u) {
        if (start[u]) q.push_back(u);
    }
    while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (int v : adj[u]) {
            if (!seen[v]) {
                seen[v] = true;
                q.push_back(v);
            }
        }
    }
    return seen;
}

std::vector<int> members(const std::vector<bool>& mask, bool value = true) {
    std::vector<int> out;
    for (int u = 0; u < static_cast<int>(mask.size()); ++u) {
        if (mask[u] == value) out.push_back(u);
    }
    return out;
}

}  // namespace

std::vector<AttractorRepellerPair> conley_pairs(const TransitionGraph& g, const ChainClassSet& c, int cap) {
    const int k = static_cast<int>(c.recurrent_sccs.size());
    if (k > cap || k > 30) {
        throw Error(ErrorKind::TooManyComponents,
                    std::to_string(k) + " recurrent classes, above the cap of " + std::to_string(cap));
    }
    const int n = g.size();
    const auto rev = reverse_all(g);
    std::vector<int> class_index(c.sccs.size(), -1);
    for (int i = 0; i < k; ++i) class_index[c.recurrent_sccs[i]] = i;

    // reach[i]: recurrent classes reachable from class i along any edge.
    std::vector<std::uint32_t> reach(k, 0);
    for (int i = 0; i < k; ++i) {
        const auto seen = reachable_from(g, c.sccs[c.recurrent_sccs[i]], true);
        for (int u = 0; u < n; ++u) {
            if (seen[u] && c.node_recurrent[u]) reach[i] |= 1u << class_index[c.scc_of[u]];
        }
    }
    std::vector<bool> sink(n, false);
    for (int u = 0; u < n; ++u) sink[u] = g.all_out[u].empty();


    std::vector<AttractorRepellerPair> out;
    std::set<std::vector<int>> seen_attractors;
    auto add = [&](AttractorRepellerPair p) {
        if (!seen_attractors.insert(p.attractor).second) return;
        p.trivial = p.attractor.empty() || static_cast<int>(p.attractor.size()) == n;
        out.push_back(std::move(p));
    };

    AttractorRepellerPair all;
    for (int u = 0; u < n; ++u) {
        all.attractor.push_back(u);
        all.trapping.push_back(u);
    }
    add(all);

    const std::uint64_t limit = 1ull << k;
    int emitted = 0;
    for (std::uint64_t mask = 0; mask < limit; ++mask) {
        bool closed = true;
        for (int i = 0; i < k && closed; ++i) {
            if ((mask >> i & 1) && (reach[i] & ~mask)) closed = false;
        }
        if (!closed) continue;
        if (++emitted > 4096) throw Error(ErrorKind::TooManyComponents, "too many attractor candidates");
        std::vector<bool> seed(n, false);
        for (int u = 0; u < n; ++u) {
            if (c.node_recurrent[u] && (mask >> class_index[c.scc_of[u]] & 1)) seed[u] = true;
        }
        std::vector<bool> attractor = bfs(g.all_out, seed);
        // Attractors are forward invariant, so they also absorb the boxes an
        // exact arc passes through before T has elapsed. One step only:
        // iterating pass edges would let box sampling drift without bound.
        const std::vector<bool> closed_set = attractor;
        for (int u = 0; u < n; ++u) {
            if (!closed_set[u]) continue;
            for (int v : g.pass_out[u]) attractor[v] = true;
        }
        const std::vector<bool> reaches_a = bfs(rev, attractor);
        std::vector<bool> bad(n, false);
        for (int u = 0; u < n; ++u) {
            if (c.node_recurrent[u] && !(mask >> class_index[c.scc_of[u]] & 1)) bad[u] = true;
            if (sink[u] && !attractor[u]) bad[u] = true;
        }
        const std::vector<bool> reaches_bad = bfs(rev, bad);
        AttractorRepellerPair p;
        p.attractor = members(attractor);
        p.repeller = members(reaches_a, false);
        p.trapping = members(reaches_bad, false);
        add(std::move(p));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.attractor.size() != b.attractor.size()) return a.attractor.size() < b.attractor.size();
        return a.attractor < b.attractor;
    });
    return out;
}

BoxLyapunov build_box_lyapunov(const TransitionGraph& g, const ChainClassSet& c) {
    const int ns = static_cast<int>(c.sccs.size());
    BoxLyapunov L;
    L.level.assign(ns, 0);
    std::set<int> used;
    // SCC ids are sinks-first, so successors are always finalized before their predecessors.
    for (int k = 0; k < ns; ++k) {
        int lvl = 0;
        for (int u : c.sccs[k]) {
            for (int v : g.chain_out[u]) {
                const int kv = c.scc_of[v];
                if (kv != k) lvl = std::max(lvl, L.level[kv] + 1);
            }
        }
        if (c.scc_recurrent[k]) {
            while (used.count(lvl)) ++lvl;
            used.insert(lvl);
        }
        L.level[k] = lvl;
    }
    L.value.assign(g.size(), 0.0);
    for (int u = 0; u < g.size(); ++u) {
        L.value[u] = 0.5 * (1.0 - std::pow(3.0, -L.level[c.scc_of[u]]));
    }
    return L;
}

const char* to_string(ObstructionEdge k) {
    switch (k) {
        case ObstructionEdge::StrictFlow: return "StrictFlow";
        case ObstructionEdge::StrictReset: return "StrictReset";
        case ObstructionEdge::ChainEq: return "ChainEq";
    }
    return "Unknown";
}

namespace {

std::set<int> classes_of(const TransitionGraph& g, const ChainClassSet& c, const State& s) {
    std::set<int> out;
    for (int v : g.nodes_containing(s)) {
        if (c.node_recurrent[v]) out.insert(c.scc_of[v]);
    }
    return out;
}

}  // namespace

std::vector<State> default_probes(const HybridSystemDef& sys, const TransitionGraph& g, const ChainClassSet& c) {
    std::vector<State> out;
    for (int m = 0; m < static_cast<int>(sys.modes.size()); ++m) {
        const ModeSpec& mode = sys.modes[m];
        for (int gi = 0; gi < static_cast<int>(mode.guards.size()); ++gi) {
            for (const Vec& p : sample_guard(mode, gi)) {
                State z{m, p};
                out.push_back(z);
                try {
                    out.push_back(apply_reset(sys, z));
                } catch (const Error&) {
                }
            }
        }
    }
    for (int k : c.recurrent_sccs) {
        const int u = c.sccs[k][c.sccs[k].size() / 2];
        out.push_back(State{g.nodes[u].mode, g.grid.cell_center(g.nodes[u])});
    }
    return out;
}

std::optional<ObstructionWitness> lyapunov_obstruction(const HybridSystemDef& sys, const TransitionGraph& g,
                                                       const ChainClassSet& c, const std::vector<State>& probes) {
    const int n = g.size();
    // Boxes touching a recurrent box; an arc leaving this band has left the closure of R.
    std::vector<bool> near_rec(n, false);
    for (int u = 0; u < n; ++u) {
        if (!c.node_recurrent[u]) continue;
        const State ctr{g.nodes[u].mode, g.grid.cell_center(g.nodes[u])};
        const double r = g.grid.h() * (0.5 * std::sqrt(static_cast<double>(ctr.x.size())) + 1e-6);
        for (int v : g.nodes_near(ctr, r)) near_rec[v] = true;
    }

    std::vector<State> pts;
    auto index_of = [&](const State& s) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (pts[i].mode == s.mode && distance(sys, pts[i], s) < 1e-9) return static_cast<int>(i);
        }
        pts.push_back(s);
        return static_cast<int>(pts.size()) - 1;
    };
    struct E {
        int to;
        ObstructionEdge kind;
    };
    std::vector<std::vector<E>> adj;
    std::deque<int> work;
    for (const State& p : probes) {
        const std::size_t before = pts.size();
        const int i = index_of(p);
        if (pts.size() > before) work.push_back(i);
    }
    IntegratorOptions opt;
    opt.skip_start_surface = true;
    opt.sample_spacing = 0.5 * g.grid.h();
    const std::size_t max_points = 4000;
    while (!work.empty()) {
        const int a = work.front();
        work.pop_front();
        if (static_cast<int>(adj.size()) < static_cast<int>(pts.size())) adj.resize(pts.size());
        const State pa = pts[a];
        auto link = [&](const State& b, ObstructionEdge kind) {
            const std::size_t before = pts.size();
            const int j = index_of(b);
            if (pts.size() > before && pts.size() < max_points) work.push_back(j);
            adj.resize(pts.size());
            adj[a].push_back({j, kind});
        };
        const bool in_r = !classes_of(g, c, pa).empty();
        if (on_guard(sys, pa) && !in_r) {
            try {
                link(apply_reset(sys, pa), ObstructionEdge::StrictReset);
            } catch (const Error&) {
            }
        }
        ArcResult r;
        try {
            r = integrate_arc(sys, pa, 50.0, opt);
        } catch (const Error&) {
            continue;
        }
        bool leaves = false;
        for (const Vec& x : r.arc.x) {
            const auto boxes = g.nodes_containing(State{pa.mode, x});
            if (boxes.empty()) continue;
            if (std::none_of(boxes.begin(), boxes.end(), [&](int v) { return near_rec[v]; })) {
                leaves = true;
                break;
            }
        }
        if (leaves) link(r.state, ObstructionEdge::StrictFlow);
    }
    adj.resize(pts.size());
    // Chain equivalence between points of a common recurrent class.
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
        for (int k : classes_of(g, c, pts[i])) by_class[k].push_back(i);
    }
    for (const auto& [k, ids] : by_class) {
        for (int i : ids) {
            for (int j : ids) {
                if (i != j) adj[i].push_back({j, ObstructionEdge::ChainEq});
            }
        }
    }

    // Shortest cycle through some strict edge a -> b: BFS from b back to a.
    std::optional<ObstructionWitness> best;
    const int np = static_cast<int>(pts.size());
    for (int a = 0; a < np; ++a) {
        for (const E& e : adj[a]) {
            if (e.kind == ObstructionEdge::ChainEq) continue;
            std::vector<int> prev(np, -2);
            std::vector<ObstructionEdge> via(np, ObstructionEdge::ChainEq);
            std::deque<int> q{e.to};
            prev[e.to] = -1;
            while (!q.empty() && prev[a] == -2) {
                const int u = q.front();
                q.pop_front();
                for (const E& f : adj[u]) {
                    if (prev[f.to] != -2) continue;
                    prev[f.to] = u;
                    via[f.to] = f.kind;
                    q.push_back(f.to);
                }
            }
            if (e.to != a && prev[a] == -2) continue;
            std::vector<std::pair<int, ObstructionEdge>> path;  // node with the edge that entered it
            for (int v = a; v != e.to; v = prev[v]) path.push_back({v, via[v]});
            std::reverse(path.begin(), path.end());
            ObstructionWitness w;
            w.contains_strict = true;
            w.cycle.push_back({pts[a], e.kind});
            int cur = e.to;
            for (const auto& [v, kind] : path) {
                w.cycle.push_back({pts[cur], kind});
                cur = v;
            }
            if (!best || w.cycle.size() < best->cycle.size()) best = std::move(w);
        }
    }
    return best;
}

namespace {

void mark_path(const BoxGrid& grid, int mode, const Vec& a, const Vec& b, std::set<BoxKey>& out) {
    double len = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) len += (b[i] - a[i]) * (b[i] - a[i]);
    const int steps = std::max(1, static_cast<int>(std::ceil(std::sqrt(len) / (0.5 * grid.h()))));
    for (int s = 0; s <= steps; ++s) {
        Vec x(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) x[i] = a[i] + (b[i] - a[i]) * s / steps;
        out.insert(grid.cell_of(State{mode, std::move(x)}));
    }
}

bool within_one_layer(const std::set<BoxKey>& inner, const std::set<BoxKey>& outer) {
    for (const BoxKey& k : inner) {
        bool ok = false;
        for (const BoxKey& o : outer) {
            if (o.mode != k.mode) continue;
            bool adj = true;
            for (std::size_t i = 0; i < k.idx.size() && adj; ++i) adj = std::abs(o.idx[i] - k.idx[i]) <= 1;
            if (adj) {
                ok = true;
                break;
            }
        }
        if (!ok) return false;
    }
    return true;
}

}  // namespace

std::set<BoxKey> omega_limit_estimate(const HybridSystemDef& sys, const State& x0, double h,
                                      const OmegaOptions& opt) {
    const BoxGrid grid(sys, h);
    SimBudget budget;
    budget.max_time = opt.t_transient + 2 * opt.t_window;
    budget.max_jumps = opt.max_jumps;
    const ExecutionTrace tr = simulate_execution(sys, x0, budget);
    std::set<BoxKey> w1, w2;
    if (tr.cls.kind == ExecClass::Zeno) {
        const int nj = static_cast<int>(tr.jumps.size());
        const int tail = std::min(opt.zeno_tail, nj);
        const int half = tail / 2;
        for (int j = nj - tail; j < nj; ++j) {
            (j < nj - (tail - half) ? w1 : w2).insert(grid.cell_of(tr.jumps[j].pre));
        }
        if (w2.empty()) w2.insert(grid.cell_of(tr.cls.final_state));
    } else if (tr.cls.kind == ExecClass::Infinite) {
        const double t1 = opt.t_transient, t2 = opt.t_transient + opt.t_window, t3 = t2 + opt.t_window;
        for (const Arc& arc : tr.arcs) {
            for (std::size_t i = 0; i < arc.t.size(); ++i) {
                const double t = arc.t[i];
                const Vec& prev = i > 0 ? arc.x[i - 1] : arc.x[i];
                const double tp = i > 0 ? arc.t[i - 1] : t;
                if (t < t1 || tp > t3) continue;
                (tp >= t2 ? w2 : w1).insert(grid.cell_of(State{arc.mode, arc.x[i]}));
                mark_path(grid, arc.mode, prev, arc.x[i], tp >= t2 ? w2 : w1);
            }
        }
        if (w2.empty()) w2.insert(grid.cell_of(tr.cls.final_state));
    } else {
        throw Error(ErrorKind::InvalidState,
                    std::string("execution is ") + to_string(tr.cls.kind) + ", not infinite or Zeno");
    }
    if (!within_one_layer(w1, w2)) {
        throw Error(ErrorKind::TransientTooShort, "tail boxes still moving between successive windows");
    }
    return w2;
}

}  // namespace hcd
