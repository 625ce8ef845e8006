#include "hcd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <random>
#include <thread>

#include "hcd/error.hpp"

namespace hcd {

namespace {

bool inside(const Box& b, const Vec& x) {
    for (int i = 0; i < b.dim(); ++i) {
        if (x[i] < b.lo[i] || x[i] > b.hi[i]) return false;
    }
    return true;
}

}  // namespace

const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::Flow: return "flow";
        case EdgeKind::Reset: return "reset";
        case EdgeKind::Cross: return "cross";
        case EdgeKind::Pass: return "pass";
    }
    return "unknown";
}

int thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HC_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

BoxGrid::BoxGrid(const HybridSystemDef& sys, double h) : h_(h) {
    if (!(h > 0)) throw Error(ErrorKind::BadParameter, "grid resolution must be positive");
    for (const auto& m : sys.modes) {
        lo_.push_back(m.domain.lo);
        hi_.push_back(m.domain.hi);
        std::vector<int> n(m.dim);
        for (int i = 0; i < m.dim; ++i) {
            const double cells = std::ceil((m.domain.hi[i] - m.domain.lo[i]) / h - 1e-9);
            if (cells > 1e9) throw Error(ErrorKind::GridTooFine, "grid axis too fine");
            n[i] = std::max(1, static_cast<int>(cells));
        }
        counts_.push_back(std::move(n));
        std::vector<bool> per(m.dim, false);
        for (int i = 0; i < m.dim && i < static_cast<int>(m.periodic.size()); ++i) per[i] = m.periodic[i];
        periodic_.push_back(std::move(per));
    }
}

std::size_t BoxGrid::cells(int mode) const {
    double n = 1;
    for (int c : counts_.at(mode)) n *= c;
    if (n > 1e18) throw Error(ErrorKind::GridTooFine, "grid too fine");
    return static_cast<std::size_t>(n);
}

std::size_t BoxGrid::total_cells() const {
    std::size_t n = 0;
    for (int m = 0; m < n_modes(); ++m) n += cells(m);
    return n;
}

bool BoxGrid::periodic(int mode, int axis) const { return periodic_.at(mode).at(axis); }

Box BoxGrid::cell_box(const BoxKey& k) const {
    const auto& lo = lo_.at(k.mode);
    const auto& hi = hi_.at(k.mode);
    Box b;
    for (std::size_t i = 0; i < lo.size(); ++i) {
        b.lo.push_back(std::min(lo[i] + k.idx[i] * h_, hi[i]));
        b.hi.push_back(std::min(lo[i] + (k.idx[i] + 1) * h_, hi[i]));
    }
    return b;
}

Vec BoxGrid::cell_center(const BoxKey& k) const {
    Box b = cell_box(k);
    Vec c(b.lo.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (b.lo[i] + b.hi[i]);
    return c;
}

BoxKey BoxGrid::cell_of(const State& s) const {
    const auto& lo = lo_.at(s.mode);
    const auto& hi = hi_.at(s.mode);
    const auto& n = counts_.at(s.mode);
    BoxKey k{s.mode, std::vector<int>(lo.size())};
    for (std::size_t i = 0; i < lo.size(); ++i) {
        double v = s.x[i];
        if (periodic_[s.mode][i]) {
            const double w = hi[i] - lo[i];
            v = lo[i] + std::fmod(std::fmod(v - lo[i], w) + w, w);
        }
        const double f = std::floor((v - lo[i]) / h_);
        k.idx[i] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(n[i] - 1)));
    }
    return k;
}

std::size_t BoxGrid::linear(const BoxKey& k) const {
    const auto& n = counts_.at(k.mode);
    std::size_t lin = 0;
    for (std::size_t i = n.size(); i-- > 0;) lin = lin * n[i] + static_cast<std::size_t>(k.idx[i]);
    return lin;
}

BoxKey BoxGrid::unlinear(int mode, std::size_t lin) const {
    const auto& n = counts_.at(mode);
    BoxKey k{mode, std::vector<int>(n.size())};
    for (std::size_t i = 0; i < n.size(); ++i) {
        k.idx[i] = static_cast<int>(lin % n[i]);
        lin /= n[i];
    }
    return k;
}

int TransitionGraph::find(const BoxKey& k) const {
    if (k.mode < 0 || k.mode >= static_cast<int>(lookup.size())) return -1;
    const auto& n = grid.counts(k.mode);
    if (k.idx.size() != n.size()) return -1;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (k.idx[i] < 0 || k.idx[i] >= n[i]) return -1;
    }
    return lookup[k.mode][grid.linear(k)];
}

namespace {

// Distance from x to a box along one axis, honoring periodic wrap.
double axis_gap(double x, double lo, double hi, bool periodic, double width) {
    double d = std::max({0.0, lo - x, x - hi});
    if (periodic && d > 0) {
        const double alt = std::max({0.0, lo - (x + width), (x - width) - hi});
        const double alt2 = std::max({0.0, lo - (x - width), (x + width) - hi});
        d = std::min({d, alt, alt2});
    }
    return d;
}

}  // namespace

std::vector<int> TransitionGraph::nodes_near(const State& s, double r) const {
    std::vector<int> out;
    if (s.mode < 0 || s.mode >= grid.n_modes()) return out;
    const auto& n = grid.counts(s.mode);
    const int d = static_cast<int>(n.size());
    const Box dom = grid.cell_box(BoxKey{s.mode, std::vector<int>(d, 0)});
    std::vector<int> lo(d), hi(d);
    Vec base(d), width(d);
    for (int i = 0; i < d; ++i) {
        base[i] = dom.lo[i];
        width[i] = n[i] * grid.h();
        const double a = std::floor((s.x[i] - r - base[i]) / grid.h());
        const double b = std::floor((s.x[i] + r - base[i]) / grid.h());
        if (grid.periodic(s.mode, i)) {
            lo[i] = static_cast<int>(std::max(a, b - n[i] + 1));
            hi[i] = static_cast<int>(b);
        } else {
            lo[i] = static_cast<int>(std::clamp(a, 0.0, static_cast<double>(n[i] - 1)));
            hi[i] = static_cast<int>(std::clamp(b, 0.0, static_cast<double>(n[i] - 1)));
        }
    }
    std::vector<int> idx = lo;
    while (true) {
        BoxKey k{s.mode, idx};
        for (int i = 0; i < d; ++i) {
            if (grid.periodic(s.mode, i)) k.idx[i] = ((idx[i] % n[i]) + n[i]) % n[i];
        }
        const int v = find(k);
        if (v >= 0) {
            const Box b = grid.cell_box(k);
            double acc = 0.0;
            for (int i = 0; i < d; ++i) {
                const double gap = axis_gap(s.x[i], b.lo[i], b.hi[i], grid.periodic(s.mode, i), width[i]);
                acc += gap * gap;
            }
            if (std::sqrt(acc) < r) out.push_back(v);
        }
        int i = 0;
        while (i < d && ++idx[i] > hi[i]) {
            idx[i] = lo[i];
            ++i;
        }
        if (i == d) break;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<int> TransitionGraph::nodes_containing(const State& s) const {
    return nodes_near(s, 1e-9 * (1.0 + grid.h()));
}

bool TransitionGraph::has_self_edge(int u) const {
    const auto& o = chain_out[u];
    return std::binary_search(o.begin(), o.end(), u);
}

namespace {

std::vector<Vec> box_samples(const Box& b, int extra, std::uint64_t seed, int mode, std::size_t lin) {
    const int d = b.dim();
    std::vector<Vec> pts;
    std::vector<int> per(d);
    for (int i = 0; i < d; ++i) per[i] = b.hi[i] > b.lo[i] ? 3 : 1;
    std::vector<int> idx(d, 0);
    while (true) {
        Vec p(d);
        for (int i = 0; i < d; ++i) p[i] = per[i] == 1 ? b.lo[i] : b.lo[i] + 0.5 * idx[i] * (b.hi[i] - b.lo[i]);
        pts.push_back(std::move(p));
        int i = 0;
        while (i < d && ++idx[i] == per[i]) idx[i++] = 0;
        if (i == d) break;
    }
    if (extra > 0) {
        std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(mode), static_cast<std::uint32_t>(lin),
                         static_cast<std::uint32_t>(lin >> 32)};
        std::mt19937_64 rng(sq);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int k = 0; k < extra; ++k) {
            Vec p(d);
            for (int i = 0; i < d; ++i) p[i] = b.lo[i] + u(rng) * (b.hi[i] - b.lo[i]);
            pts.push_back(std::move(p));
        }
    }
    return pts;
}

struct Builder {
    const HybridSystemDef& sys;
    TransitionGraph& g;
    IntegratorOptions flow_opt;
    IntegratorOptions seg_opt;
    double pad;
    double event_tol = Tolerances{}.event;

    // Targets of an eps-jump landing near p: boxes within pad plus the box
    // that holds p (the source box when p is still inside it).
    void targets(const State& p, int src, std::vector<int>& out) const {
        out.clear();
        if (pad > 0) out = g.nodes_near(p, pad);
        int home = -1;
        if (src >= 0 && g.nodes[src].mode == p.mode) {
            const Box b = g.grid.cell_box(g.nodes[src]);
            bool inside = true;
            for (int i = 0; i < b.dim(); ++i) {
                if (g.grid.periodic(p.mode, i)) continue;
                inside = inside && p.x[i] >= b.lo[i] - 1e-12 && p.x[i] <= b.hi[i] + 1e-12;
            }
            if (inside) home = src;
        }
        if (home < 0) home = g.find(g.grid.cell_of(p));
        if (home >= 0 && std::find(out.begin(), out.end(), home) == out.end()) out.push_back(home);
    }

    // True when p and the center of box v lie strictly on opposite sides of a guard surface.
    bool across(const State& p, int v) const {
        const ModeSpec& m = sys.mode(p.mode);
        if (m.guards.empty()) return false;
        const Vec c = g.grid.cell_center(g.nodes[v]);
        for (const auto& gc : m.guards) {
            if (gc.psi.is_zero()) continue;
            const double a = gc.psi.eval(p.x);
            const double b = gc.psi.eval(c);
            if ((a > event_tol && b < -event_tol) || (a < -event_tol && b > event_tol)) return true;
        }
        return false;
    }

    void emit(int u, const State& p, EdgeKind same_side, std::vector<Edge>& out, std::vector<int>& scratch) const {
        targets(p, u, scratch);
        for (int v : scratch) out.push_back({u, v, across(p, v) ? EdgeKind::Cross : same_side});
    }

    // Follows the exact execution from cur, whose clock already reads t. Guard
    // points give Cross edges, reset images give Reset edges, and points with
    // elapsed time in [T, T + W] give Flow edges (Cross when across a guard).
    // A reset image lying on a further guard may be nudged off it by the
    // reset tolerance; with `spawn` that branch is followed too, keeping the
    // clock, since reset errors do not restart the T spacing.
    void run(int u, State cur, double t, int resets, bool skip_first, bool spawn, std::vector<Edge>& out,
             std::vector<int>& scratch, bool& undefined) const {
        const double T = g.params.T_step, W = g.params.flow_window();
        const double t_end = T + std::max(W, 0.0);
        auto emit_free = [&](const State& p) {
            if (!on_guard(sys, p, event_tol)) emit(u, p, EdgeKind::Flow, out, scratch);
        };
        while (true) {
            if (!skip_first && on_guard(sys, cur, event_tol)) {
                // An eps-jump off the guard is a continuous-time jump and
                // needs T of flow since the last one.
                if (t >= T) {
                    targets(cur, u, scratch);
                    for (int v : scratch) out.push_back({u, v, EdgeKind::Cross});
                }
                if (++resets > g.params.max_reset_chain) return;
                try {
                    cur = apply_reset(sys, cur, event_tol);
                } catch (const Error& e) {
                    if (e.kind() == ErrorKind::ResetOutOfDomain) undefined = true;
                    return;
                }
                targets(cur, -1, scratch);
                for (int v : scratch) out.push_back({u, v, EdgeKind::Reset});
                if (spawn && on_guard(sys, cur, event_tol)) run(u, cur, t, resets, true, false, out, scratch, undefined);
                continue;
            }
            if (t >= T && W <= 0.0) {
                emit(u, cur, EdgeKind::Flow, out, scratch);
                return;
            }
            if (t >= t_end) return;
            const bool in_window = t >= T;
            const double stop = in_window ? t_end : T;
            IntegratorOptions opt = seg_opt;
            opt.skip_start_surface = skip_first;
            skip_first = false;
            ArcResult r;
            try {
                r = integrate_arc(sys, cur, stop - t, opt);
            } catch (const Error&) {
                return;
            }
            if (in_window) {
                for (const Vec& x : r.arc.x) emit_free(State{r.arc.mode, x});
            } else {
                // Points still inside u's closed box add nothing; their home
                // cell can differ from u only through a shared face.
                const Box bu = g.grid.cell_box(g.nodes[u]);
                for (const Vec& x : r.arc.x) {
                    const State p{r.arc.mode, x};
                    if (p.mode == g.nodes[u].mode && inside(bu, x)) continue;
                    if (on_guard(sys, p, event_tol)) continue;
                    const int v = g.find(g.grid.cell_of(p));
                    if (v >= 0 && v != u) out.push_back({u, v, EdgeKind::Pass});
                }
            }
            t += r.time;
            cur = std::move(r.state);
            if (r.kind == TerminalKind::GuardHit) continue;
            if (r.kind == TerminalKind::TimeOut) {
                t = stop;
                if (!in_window && W > 0.0) emit_free(cur);
                continue;
            }
            // Left the domain: the execution is blocked here.
            emit(u, cur, EdgeKind::Flow, out, scratch);
            return;
        }
    }

    void process(int u, std::vector<Edge>& out, bool& undefined, bool& guard) const {
        const BoxKey& key = g.nodes[u];
        const Box b = g.grid.cell_box(key);
        std::vector<int> scratch;
        const std::size_t begin = out.size();
        for (Vec& p : box_samples(b, g.params.samples_per_box, g.params.seed, key.mode, g.grid.linear(key))) {
            State s{key.mode, std::move(p)};
            if (!in_domain(sys, s)) continue;
            if (on_guard(sys, s, event_tol)) guard = true;
            run(u, std::move(s), 0.0, 0, false, true, out, scratch, undefined);
        }
        std::sort(out.begin() + static_cast<std::ptrdiff_t>(begin), out.end());
        out.erase(std::unique(out.begin() + static_cast<std::ptrdiff_t>(begin), out.end()), out.end());
    }
};

}  // namespace

TransitionGraph build_transition_graph(const HybridSystemDef& sys, const GraphParams& params) {
    if (!(params.T_step > 0)) throw Error(ErrorKind::BadParameter, "T_step must be positive");
    TransitionGraph g;
    g.params = params;
    g.grid = BoxGrid(sys, params.h);
    if (g.grid.total_cells() > params.max_cells) {
        throw Error(ErrorKind::GridTooFine, "grid has " + std::to_string(g.grid.total_cells()) +
                                                " cells, above the cap of " + std::to_string(params.max_cells));
    }
    for (int m = 0; m < g.grid.n_modes(); ++m) {
        const std::size_t nc = g.grid.cells(m);
        g.lookup.emplace_back(nc, -1);
        for (std::size_t lin = 0; lin < nc; ++lin) {
            BoxKey k = g.grid.unlinear(m, lin);
            const Box b = g.grid.cell_box(k);
            bool any = false;
            for (Vec& p : box_samples(b, params.samples_per_box, params.seed, m, lin)) {
                if (in_domain(sys, State{m, std::move(p)})) {
                    any = true;
                    break;
                }
            }
            if (!any) continue;
            g.lookup[m][lin] = static_cast<int>(g.nodes.size());
            g.nodes.push_back(std::move(k));
        }
    }
    const int n = g.size();
    g.guard_box.assign(n, false);
    g.reset_undefined.assign(n, false);

    Builder bld{sys, g, {}, {}, params.pad()};
    bld.flow_opt.tol = params.integrator_tol;
    bld.flow_opt.record = false;
    bld.seg_opt = bld.flow_opt;
    bld.seg_opt.record = true;
    bld.seg_opt.sample_spacing = 0.5 * params.h;

    const int nt = std::min(thread_count(params.threads), std::max(1, n));
    std::vector<std::vector<Edge>> parts(nt);
    std::vector<std::vector<char>> undefined(nt, std::vector<char>(n, 0)), guard(nt, std::vector<char>(n, 0));
    auto work = [&](int tid) {
        for (int u = tid; u < n; u += nt) {
            bool und = false, gb = false;
            bld.process(u, parts[tid], und, gb);
            undefined[tid][u] = und;
            guard[tid][u] = gb;
        }
    };
    if (nt == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nt; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    g.edges.reserve(total);
    for (auto& p : parts) {
        g.edges.insert(g.edges.end(), p.begin(), p.end());
        std::vector<Edge>().swap(p);
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    for (int t = 0; t < nt; ++t) {
        for (int u = 0; u < n; ++u) {
            if (undefined[t][u]) g.reset_undefined[u] = true;
            if (guard[t][u]) g.guard_box[u] = true;
        }
    }
    g.chain_out.assign(n, {});
    g.all_out.assign(n, {});
    g.pass_out.assign(n, {});
    for (const Edge& e : g.edges) {
        if (e.kind == EdgeKind::Pass) {
            g.pass_out[e.src].push_back(e.dst);
            continue;
        }
        if (g.all_out[e.src].empty() || g.all_out[e.src].back() != e.dst) g.all_out[e.src].push_back(e.dst);
        if (e.kind != EdgeKind::Cross &&
            (g.chain_out[e.src].empty() || g.chain_out[e.src].back() != e.dst)) {
            g.chain_out[e.src].push_back(e.dst);
        }
    }
    // Edges are sorted by (src, dst, kind), so each adjacency list is sorted and unique.
    return g;
}

std::vector<bool> reachable_from(const TransitionGraph& g, const std::vector<int>& sources, bool all_edges) {
    std::vector<bool> seen(g.size(), false);
    std::deque<int> q;
    for (int s : sources) {
        if (!seen[s]) {
            seen[s] = true;
            q.push_back(s);
        }
    }
    const auto& adj = all_edges ? g.all_out : g.chain_out;
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

}  // namespace hcd
