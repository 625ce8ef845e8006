#include <catch_amalgamated.hpp>

#include <algorithm>
#include <deque>
#include <map>
#include <string>
#include <random>

#include "hcd/builtins.hpp"
#include "hcd/conley.hpp"
#include "hcd/error.hpp"

using namespace hcd;

namespace {

struct Setup {
    const char* name;
    BuiltinId id;
    double h, T_step, window;
    double d = 0.8;
};

struct Built {
    HybridSystemDef sys;
    TransitionGraph g;
    ChainClassSet c;
};

const Built& build(const Setup& s, double h) {
    static std::map<std::pair<std::string, double>, Built> cache;
    const auto key = std::make_pair(std::string(s.name), h);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    BuiltinParams p;
    p.d = s.d;
    Built b;
    b.sys = instantiate(s.id, p);
    GraphParams gp;
    gp.h = h;
    gp.T_step = s.T_step;
    gp.window = s.window;
    b.g = build_transition_graph(b.sys, gp);
    b.c = chain_recurrent_boxes(b.g);
    return cache.emplace(key, std::move(b)).first->second;
}

const Setup kCounterexample{"counterexample", BuiltinId::Counterexample, 0.01, 0.05, -1};
const Setup kOmega{"omega", BuiltinId::OmegaPathology, 0.005, 1, -1};
const Setup kGradient{"gradientflow", BuiltinId::GradientFlow, 0.05, 2, 0};
const Setup kRotation{"rotation", BuiltinId::CircleRotation, 0.01, 1, 0};
const Setup kBall{"ball", BuiltinId::BouncingBall, 0.1, 4, 0};

// Plain BFS over the union of the given adjacency lists.
std::vector<bool> reach(int n, const std::vector<const std::vector<std::vector<int>>*>& adjs, int from) {
    std::vector<bool> seen(n, false);
    std::deque<int> q{from};
    seen[from] = true;
    while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (const auto* adj : adjs) {
            for (int v : (*adj)[u]) {
                if (!seen[v]) {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
    }
    return seen;
}

bool near_recurrent(const Built& b, const State& s, double r) {
    for (int v : b.g.nodes_near(s, r)) {
        if (b.c.node_recurrent[v]) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("counterexample recurrent boxes") {
    const Built& b = build(kCounterexample, kCounterexample.h);
    REQUIRE(b.c.recurrent_sccs.size() == 1);
    for (int v = 0; v < b.g.size(); ++v) {
        const Box box = b.g.grid.cell_box(b.g.nodes[v]);
        const bool expected = b.g.nodes[v].mode == 0 || box.hi[0] <= 2.0 + 1e-9;
        INFO("box " << v << " mode " << b.g.nodes[v].mode << " [" << box.lo[0] << ", " << box.hi[0] << "]");
        CHECK(b.c.node_recurrent[v] == expected);
    }
}

TEST_CASE("property: every recurrent class is strongly connected") {
    for (const Setup& s : {kCounterexample, kOmega, kGradient, kRotation}) {
        const Built& b = build(s, s.h);
        const int n = b.g.size();
        for (int k : b.c.recurrent_sccs) {
            const auto& members = b.c.sccs[k];
            for (int u : members) {
                const auto seen = reach(n, {&b.g.chain_out, &b.g.pass_out}, u);
                for (int v : members) {
                    INFO(s.name << " class " << k << " " << u << " -> " << v);
                    CHECK(seen[v]);
                }
            }
            if (members.size() == 1) CHECK(b.g.has_self_edge(members[0]));
        }
    }
}

TEST_CASE("property: box Lyapunov function decreases along chain edges off the classes") {
    for (const Setup& s : {kCounterexample, kOmega, kGradient, kBall}) {
        const Built& b = build(s, s.h);
        const BoxLyapunov L = build_box_lyapunov(b.g, b.c);
        int strict = 0;
        for (const Edge& e : b.g.edges) {
            if (e.kind != EdgeKind::Flow && e.kind != EdgeKind::Reset) continue;
            INFO(s.name << " edge " << e.src << " -> " << e.dst);
            if (b.c.scc_of[e.src] == b.c.scc_of[e.dst]) {
                CHECK(L.value[e.src] == L.value[e.dst]);
            } else {
                CHECK(L.value[e.src] > L.value[e.dst]);
                ++strict;
            }
        }
        CHECK(strict > 0);
        // Distinct recurrent classes sit at distinct levels.
        std::vector<int> levels;
        for (int k : b.c.recurrent_sccs) levels.push_back(L.level[k]);
        std::sort(levels.begin(), levels.end());
        CHECK(std::adjacent_find(levels.begin(), levels.end()) == levels.end());
    }
}

TEST_CASE("property: no path leads from a repeller into its attractor") {
    for (const Setup& s : {kCounterexample, kOmega, kGradient, kBall}) {
        const Built& b = build(s, s.h);
        const auto pairs = conley_pairs(b.g, b.c);
        REQUIRE(pairs.size() >= 2);
        for (const auto& p : pairs) {
            const auto seen = reachable_from(b.g, p.repeller, true);
            for (int a : p.attractor) {
                INFO(s.name << " attractor node " << a);
                CHECK_FALSE(seen[a]);
            }
        }
    }
}

TEST_CASE("property: refinement shrinks the recurrent boxes") {
    // Coarse side is twice the fine side.
    for (const Setup& s : {kCounterexample, kOmega, kGradient, kBall}) {
        const Built& fine = build(s, s.h);
        const Built& coarse = build(s, 2 * s.h);
        int checked = 0;
        for (int v = 0; v < fine.g.size(); ++v) {
            if (!fine.c.node_recurrent[v]) continue;
            const State centre{fine.g.nodes[v].mode, fine.g.grid.cell_center(fine.g.nodes[v])};
            INFO(s.name << " fine box " << v);
            CHECK(near_recurrent(coarse, centre, 2 * s.h));
            ++checked;
        }
        CHECK(checked > 0);
    }
}

namespace {

// Intersection over all pairs of A united with the nodes outside the trapping
// region, i.e. those with some box path that never enters A.
std::vector<bool> pair_cover(const Built& b) {
    const int n = b.g.size();
    std::vector<bool> all(n, true);
    for (const auto& p : conley_pairs(b.g, b.c)) {
        std::vector<bool> in(n, true);
        for (int u : p.trapping) in[u] = false;
        for (int u : p.attractor) in[u] = true;
        for (int u = 0; u < n; ++u) all[u] = all[u] && in[u];
    }
    return all;
}

bool within_layer(const Built& b, int u, const std::vector<bool>& set) {
    const State centre{b.g.nodes[u].mode, b.g.grid.cell_center(b.g.nodes[u])};
    for (int v : b.g.nodes_near(centre, b.g.grid.h())) {
        if (set[v]) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("property: attractor and repeller pairs decompose the recurrent boxes") {
    for (const Setup& s : {kRotation, kGradient, kBall}) {
        const Built& b = build(s, s.h);
        const auto all = pair_cover(b);
        // On the ball, apex boxes above the spurious shell classes are tied to
        // them only through cross edges, so they stay in every cover without
        // being recurrent; only the inclusion of the recurrent boxes is checked.
        const bool both_ways = s.id != BuiltinId::BouncingBall;
        for (int u = 0; u < b.g.size(); ++u) {
            INFO(s.name << " box " << u);
            if (b.c.node_recurrent[u]) CHECK(within_layer(b, u, all));
            if (both_ways && all[u]) CHECK(within_layer(b, u, b.c.node_recurrent));
        }
    }
}

TEST_CASE("counterexample has no nontrivial pair and a strict obstruction cycle") {
    const Built& b = build(kCounterexample, kCounterexample.h);
    const auto pairs = conley_pairs(b.g, b.c);
    for (const auto& p : pairs) CHECK(p.trivial);
    const auto w = lyapunov_obstruction(b.sys, b.g, b.c, default_probes(b.sys, b.g, b.c));
    REQUIRE(w);
    CHECK(w->contains_strict);
}

TEST_CASE("property: executions from recurrent boxes stay near them") {
    // Near the gradient saddle the box neighbourhood is not forward invariant
    // even though the saddle itself is, so only its sinks are sampled. The
    // ball is left out: at practical h its box set holds spurious shell
    // classes whose orbits reach well above the boxes.
    struct Case {
        Setup s;
        double budget;
    };
    for (const Case& cs : {Case{kCounterexample, 20}, Case{kRotation, 0}, Case{kGradient, 20}}) {
        const Built& b = build(cs.s, cs.s.h);
        const double h = b.g.grid.h();
        std::vector<int> pool;
        for (int v = 0; v < b.g.size(); ++v) {
            if (!b.c.node_recurrent[v]) continue;
            if (cs.s.id == BuiltinId::GradientFlow) {
                const Vec c = b.g.grid.cell_center(b.g.nodes[v]);
                if (std::abs(c[0]) < 0.5) continue;
            }
            pool.push_back(v);
        }
        REQUIRE_FALSE(pool.empty());
        std::mt19937_64 rng(21);
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        int runs = 0;
        for (int attempt = 0; attempt < 1000 && runs < 100; ++attempt) {
            const int v = pool[pick(rng)];
            const Box box = b.g.grid.cell_box(b.g.nodes[v]);
            State s{b.g.nodes[v].mode, Vec(box.dim())};
            for (int i = 0; i < box.dim(); ++i) s.x[i] = std::uniform_real_distribution<double>(box.lo[i], box.hi[i])(rng);
            if (!in_domain(b.sys, s)) continue;
            SimBudget budget;
            budget.max_time = cs.budget;
            budget.max_jumps = 100;
            const ExecutionTrace tr = simulate_execution(b.sys, s, budget);
            ++runs;
            for (const Arc& arc : tr.arcs) {
                for (const Vec& x : arc.x) {
                    INFO(cs.s.name << " from box " << v);
                    CHECK(near_recurrent(b, State{arc.mode, x}, 2 * h));
                }
            }
        }
        CHECK(runs == 100);
    }
}

TEST_CASE("too many classes for pair enumeration") {
    const Built& b = build(kGradient, kGradient.h);
    CHECK_THROWS_AS(conley_pairs(b.g, b.c, 2), Error);
}

TEST_CASE("omega limit estimate of the counterexample start") {
    const auto ce = instantiate(BuiltinId::Counterexample);
    const auto boxes = omega_limit_estimate(ce, State{0, {-1}}, 0.01);
    REQUIRE(boxes.size() == 1);
    CHECK(boxes.begin()->mode == 0);
}
