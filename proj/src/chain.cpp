#include "hcd/chain.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <sstream>

#include "hcd/error.hpp"

namespace hcd {

void EpsTChain::recompute_eta() {
    eta.assign(1, 0);
    for (int j = 1; j <= N && j - 1 < static_cast<int>(reset_jump.size()); ++j) {
        if (!reset_jump[j - 1]) eta.push_back(j);
    }
}

namespace {

// Exact execution from p for the given duration: arcs joined by resets,
// with times measured from the start of the segment.
struct Segment {
    std::vector<Arc> arcs;
};

Segment run_segment(const HybridSystemDef& sys, const State& p, double duration, double spacing) {
    Segment seg;
    State cur = p;
    double t = 0.0;
    int resets = 0;
    bool need_arc = true;
    IntegratorOptions opt;
    opt.sample_spacing = spacing;
    auto point_arc = [&] {
        Arc a;
        a.mode = cur.mode;
        a.t = {t};
        a.x = {cur.x};
        seg.arcs.push_back(std::move(a));
    };
    while (true) {
        if (on_guard(sys, cur)) {
            if (need_arc) point_arc();
            if (++resets > 10000) break;
            try {
                cur = apply_reset(sys, cur);
            } catch (const Error&) {
                break;
            }
            need_arc = true;
            continue;
        }
        if (t >= duration) {
            if (need_arc) point_arc();
            break;
        }
        ArcResult r = integrate_arc(sys, cur, duration - t, opt);
        for (double& v : r.arc.t) v += t;
        seg.arcs.push_back(std::move(r.arc));
        need_arc = false;
        t += r.time;
        cur = std::move(r.state);
        if (r.kind == TerminalKind::DomainExit) break;
        // A timeout can land on the guard; the loop head then fires the reset.
        if (r.kind == TerminalKind::TimeOut) t = duration;
    }
    return seg;
}

bool across_guard(const HybridSystemDef& sys, const State& a, const Vec& b) {
    const double tol = Tolerances{}.event;
    for (const auto& gc : sys.mode(a.mode).guards) {
        if (gc.psi.is_zero()) continue;
        const double pa = gc.psi.eval(a.x), pb = gc.psi.eval(b);
        if ((pa > tol && pb < -tol) || (pa < -tol && pb > tol)) return true;
    }
    return false;
}

struct SearchNode {
    State start;
    int parent = -1;
    double jump_elapsed = 0.0;  // when the parent's segment jumped to this start
    int reset_arc = -1;         // >= 0: lands near the reset opening this arc of the parent's segment
    double clock = 0.0;         // time since the last continuous jump, at start
};

// Points of y's backward orbit inside the flow set with their flow time to y.
// Landing on one and flowing ends the chain exactly at y without a jump.
struct Anchor {
    State p;
    double s = 0.0;
};

std::vector<Anchor> backward_anchors(const HybridSystemDef& sys, const State& y, double s_max, double spacing) {
    std::vector<Anchor> out{{y, 0.0}};
    const PolyMap& field = sys.mode(y.mode).field;
    const Vec fy = eval(field, y.x);
    double speed = 0.0;
    for (double v : fy) speed += v * v;
    speed = std::sqrt(speed);
    if (on_guard(sys, y) || speed < 1e-12 || !(s_max > 0)) return out;
    const int steps = std::clamp(static_cast<int>(std::ceil(s_max * speed / spacing)), 1, 256);
    const double ds = s_max / steps;
    Vec cur = y.x;
    IntegratorOptions check;
    check.record = false;
    for (int k = 1; k <= steps; ++k) {
        cur = flow_free(field, cur, -ds);
        State p{y.mode, cur};
        if (!in_domain(sys, p) || on_guard(sys, p, 1e3 * Tolerances{}.event)) break;
        const ArcResult r = integrate_arc(sys, p, k * ds, check);
        if (r.kind != TerminalKind::TimeOut || distance(sys, r.state, y) > 1e-7) break;
        out.push_back({std::move(p), k * ds});
    }
    return out;
}

}  // namespace

std::optional<EpsTChain> find_chain(const HybridSystemDef& sys, const TransitionGraph& g, const State& x,
                                    const State& y, double eps, double T, const ChainSearchOptions& opt) {
    if (!(eps > 0) || !(T >= 0)) throw Error(ErrorKind::BadParameter, "eps must be positive and T non-negative");
    if (!in_domain(sys, x) || !in_domain(sys, y)) throw Error(ErrorKind::InvalidState, "chain endpoints must lie in I");
    const double horizon = T + (opt.horizon >= 0 ? opt.horizon : g.params.T_step);
    const double spacing = 0.25 * eps;
    const double reach = eps * (1.0 - 1e-6);
    const int n = g.size();

    // Reverse BFS distance (in chain edges) to the boxes near y.
    std::vector<std::vector<int>> rev(n);
    for (int u = 0; u < n; ++u) {
        for (int v : g.chain_out[u]) rev[v].push_back(u);
    }
    constexpr int inf = std::numeric_limits<int>::max();
    std::vector<int> dist(n, inf);
    std::deque<int> q;
    for (int v : g.nodes_near(y, eps)) {
        dist[v] = 0;
        q.push_back(v);
    }
    while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (int v : rev[u]) {
            if (dist[v] == inf) {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }

    const std::vector<Anchor> anchors = backward_anchors(sys, y, T, spacing);

    // Guard points are landing targets too: jumping onto the guard is the
    // only way into a reset when the flow itself never reaches it.
    struct GuardTarget {
        State z;
        int best = inf;
        bool used[2] = {false, false};
    };
    std::vector<GuardTarget> guard_targets;
    for (const ModeSpec& m : sys.modes) {
        for (int gi = 0; gi < static_cast<int>(m.guards.size()); ++gi) {
            for (Vec& z : sample_guard(m, gi)) {
                GuardTarget gt{State{m.id, std::move(z)}};
                for (int v : g.nodes_containing(gt.z)) gt.best = std::min(gt.best, dist[v]);
                if (gt.best != inf) guard_targets.push_back(std::move(gt));
            }
        }
    }

    std::vector<SearchNode> nodes{{x, -1, 0.0, -1, 0.0}};
    using Item = std::tuple<int, long, int>;  // heuristic, insertion order, node
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    open.push({0, 0, 0});
    long seq = 1;
    // Index 0: reached by a continuous jump, 1: by a perturbed reset.
    std::vector<bool> visited[2] = {std::vector<bool>(n, false), std::vector<bool>(n, false)};
    int goal_parent = -1, goal_anchor = -1, goal_reset_arc = -1;
    double goal_elapsed = 0.0;
    int expansions = 0;

    // Lands near `from` (within reach) on boxes, guard points or anchors.
    // `across` rejects targets on the far side of a guard surface.
    auto land = [&](int k, const State& from, double t, int reset_arc, double clock) {
        const int kind = reset_arc >= 0 ? 1 : 0;
        for (int a = 0; a < static_cast<int>(anchors.size()); ++a) {
            const State& p = anchors[a].p;
            if (p.mode != from.mode || distance(sys, from, p) > reach) continue;
            if (kind == 0 && across_guard(sys, from, p.x)) continue;
            goal_parent = k;
            goal_anchor = a;
            goal_elapsed = t;
            goal_reset_arc = reset_arc;
            return;
        }
        for (int v : g.nodes_near(from, eps)) {
            if (visited[kind][v] || dist[v] == inf) continue;
            State c{g.nodes[v].mode, g.grid.cell_center(g.nodes[v])};
            if (!in_domain(sys, c) || distance(sys, from, c) > reach) continue;
            if (kind == 0 && across_guard(sys, from, c.x)) continue;
            visited[kind][v] = true;
            nodes.push_back({std::move(c), k, t, reset_arc, clock});
            open.push({dist[v], seq++, static_cast<int>(nodes.size()) - 1});
        }
        for (GuardTarget& gt : guard_targets) {
            if (gt.used[kind] || gt.z.mode != from.mode || distance(sys, from, gt.z) > reach) continue;
            gt.used[kind] = true;
            nodes.push_back({gt.z, k, t, reset_arc, clock});
            open.push({gt.best, seq++, static_cast<int>(nodes.size()) - 1});
        }
    };

    while (!open.empty() && goal_parent < 0 && expansions < opt.max_expansions) {
        const int k = std::get<2>(open.top());
        open.pop();
        ++expansions;
        const double clock0 = nodes[k].clock;
        Segment seg;
        try {
            seg = run_segment(sys, nodes[k].start, horizon, spacing);
        } catch (const Error&) {
            continue;
        }
        for (std::size_t a = 0; a < seg.arcs.size() && goal_parent < 0; ++a) {
            const Arc& arc = seg.arcs[a];
            if (a > 0) {
                // A reset jump may land anywhere within eps of the reset image.
                const double tr = arc.t.front();
                land(k, State{arc.mode, arc.x.front()}, tr, static_cast<int>(a), clock0 + tr);
            }
            for (std::size_t i = 0; i < arc.t.size() && goal_parent < 0; ++i) {
                const double t = arc.t[i];
                if (clock0 + t < T - 1e-12) continue;
                if (opt.nice_only && t - arc.t.front() < T - 1e-12) continue;
                const State qs{arc.mode, arc.x[i]};
                // Rerunning the segment to a point this close to the guard
                // could end on it and fire the reset.
                if (on_guard(sys, qs, 1e3 * Tolerances{}.event)) continue;
                land(k, qs, t, -1, 0.0);
            }
        }
    }
    if (goal_parent < 0) return std::nullopt;

    std::vector<int> path;
    for (int k = goal_parent; k >= 0; k = nodes[k].parent) path.push_back(k);
    std::reverse(path.begin(), path.end());

    EpsTChain chain;
    chain.eps = eps;
    chain.T = T;
    double global = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i) {
        const bool last = i + 1 == path.size();
        const double e = last ? goal_elapsed : nodes[path[i + 1]].jump_elapsed;
        const int cut = last ? goal_reset_arc : nodes[path[i + 1]].reset_arc;
        Segment seg = run_segment(sys, nodes[path[i]].start, e, spacing);
        // A perturbed reset replaces the exact reset image and what follows it.
        if (cut >= 0 && static_cast<int>(seg.arcs.size()) > cut) seg.arcs.resize(static_cast<std::size_t>(cut));
        for (std::size_t a = 0; a < seg.arcs.size(); ++a) {
            Arc arc = std::move(seg.arcs[a]);
            for (double& v : arc.t) v += global;
            if (!chain.arcs.empty()) chain.reset_jump.push_back(a > 0 || nodes[path[i]].reset_arc >= 0);
            chain.arcs.push_back(std::move(arc));
        }
        global += e;
    }
    const Anchor& an = anchors[static_cast<std::size_t>(goal_anchor)];
    Arc tail;
    if (an.s > 0) {
        IntegratorOptions o;
        o.sample_spacing = spacing;
        tail = integrate_arc(sys, an.p, an.s, o).arc;
        for (double& v : tail.t) v += global;
        tail.x.back() = y.x;
    } else {
        tail.mode = y.mode;
        tail.t = {global};
        tail.x = {y.x};
    }
    chain.arcs.push_back(std::move(tail));
    chain.reset_jump.push_back(goal_reset_arc >= 0);
    chain.N = static_cast<int>(chain.arcs.size()) - 1;
    for (const Arc& a : chain.arcs) chain.tau.push_back(a.t.front());
    chain.recompute_eta();
    return chain;
}

ChainReport validate_chain(const HybridSystemDef& sys, const EpsTChain& c, double arc_tol) {
    ChainReport rep;
    auto fail = [&](const std::string& s) { rep.violations.push_back(s); };
    const double tol = Tolerances{}.event;
    if (c.N < 1) fail("chain needs N >= 1");
    if (static_cast<int>(c.arcs.size()) != c.N + 1 || static_cast<int>(c.tau.size()) != c.N + 1 ||
        static_cast<int>(c.reset_jump.size()) != c.N) {
        fail("chain arrays have inconsistent lengths");
        return rep;
    }
    if (c.tau[0] != 0.0) fail("tau_0 must be 0");
    for (int j = 0; j < c.N; ++j) {
        if (c.tau[j + 1] < c.tau[j]) fail("jump times decrease at j=" + std::to_string(j + 1));
    }
    // Arc dynamics.
    for (int j = 0; j <= c.N; ++j) {
        const Arc& a = c.arcs[j];
        if (a.t.empty() || a.t.size() != a.x.size()) {
            fail("arc " + std::to_string(j) + " is empty");
            continue;
        }
        if (std::abs(a.t.front() - c.tau[j]) > 1e-12 * (1 + c.tau[j])) {
            fail("arc " + std::to_string(j) + " does not start at tau_j");
        }
        if (j < c.N && std::abs(a.t.back() - c.tau[j + 1]) > 1e-9 * (1 + c.tau[j + 1])) {
            fail("arc " + std::to_string(j) + " does not end at tau_{j+1}");
        }
        const State s0{a.mode, a.x.front()};
        if (!in_domain(sys, s0)) fail("arc " + std::to_string(j) + " starts outside I");
        const double dur = a.t.back() - a.t.front();
        if (dur <= 0 || a.cylinder) continue;
        IntegratorOptions opt;
        opt.record = false;
        const ArcResult r = integrate_arc(sys, s0, dur, opt);
        if (r.time < dur - 1e-9 * (1 + dur)) {
            fail("arc " + std::to_string(j) + " leaves the flow set before its end");
        }
        Vec ref = a.x.front();
        const PolyMap& field = sys.mode(a.mode).field;
        for (std::size_t i = 1; i < a.t.size(); ++i) {
            ref = flow_free(field, ref, a.t[i] - a.t[i - 1]);
            double err = 0.0, scale = 1.0;
            for (std::size_t d = 0; d < ref.size(); ++d) {
                err = std::max(err, std::abs(ref[d] - a.x[i][d]));
                scale = std::max(scale, std::abs(ref[d]));
            }
            if (err > arc_tol * scale) {
                std::ostringstream os;
                os << "arc " << j << " deviates from the flow by " << err << " at t=" << a.t[i];
                fail(os.str());
                break;
            }
        }
    }
    // Jumps.
    for (int j = 1; j <= c.N; ++j) {
        const Arc& before = c.arcs[j - 1];
        const Arc& after = c.arcs[j];
        const State pre{before.mode, before.x.back()};
        const State post{after.mode, after.x.front()};
        if (c.reset_jump[j - 1]) {
            if (!on_guard(sys, pre, tol)) {
                fail("reset jump " + std::to_string(j) + " starts off the guard");
                continue;
            }
            const State img = apply_reset(sys, pre, tol);
            if (distance(sys, img, post) > c.eps) fail("reset jump " + std::to_string(j) + " lands farther than eps");
        } else {
            if (on_guard(sys, pre, tol)) fail("continuous jump " + std::to_string(j) + " starts on the guard");
            if (pre.mode != post.mode) fail("continuous jump " + std::to_string(j) + " changes mode");
            else if (distance(sys, pre, post) > c.eps) fail("continuous jump " + std::to_string(j) + " exceeds eps");
        }
    }
    // Spacing of continuous jumps.
    std::vector<int> eta{0};
    for (int j = 1; j <= c.N; ++j) {
        if (!c.reset_jump[j - 1]) eta.push_back(j);
    }
    if (eta != c.eta) fail("eta does not list the continuous jumps");
    for (std::size_t k = 1; k < eta.size(); ++k) {
        if (c.tau[eta[k]] - c.tau[eta[k - 1]] < c.T - 1e-9) {
            fail("continuous jumps " + std::to_string(eta[k - 1]) + " and " + std::to_string(eta[k]) +
                 " are closer than T");
        }
    }
    return rep;
}

bool is_nice_chain(const EpsTChain& c, double T) {
    for (int j = 1; j <= c.N && j - 1 < static_cast<int>(c.reset_jump.size()); ++j) {
        if (c.reset_jump[j - 1]) continue;
        if (c.tau[j] - c.tau[j - 1] < T - 1e-9) return false;
    }
    return true;
}

}  // namespace hcd
