#include "hcd/suspension.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "hcd/error.hpp"

namespace hcd {

RelaxedSystem relax(const HybridSystemDef& sys) { return RelaxedSystem{sys}; }

SuspensionPoint embed(const State& x) { return SuspensionPoint::base(x); }

SuspensionPoint canonical(const HybridSystemDef& sys, const SuspensionPoint& p) {
    if (p.is_base()) {
        if (on_guard(sys, p.x)) return SuspensionPoint::cyl(p.x, 0.0);
        return p;
    }
    if (!(p.s >= 0.0)) throw Error(ErrorKind::InvalidState, "cylinder coordinate must be non-negative");
    if (!on_guard(sys, p.x)) throw Error(ErrorKind::InvalidState, "cylinder point over a state off the guard");
    if (p.s >= 1.0) return canonical(sys, SuspensionPoint::base(apply_reset(sys, p.x)));
    return p;
}

double suspension_distance(const HybridSystemDef& sys, const SuspensionPoint& p0, const SuspensionPoint& q0) {
    const SuspensionPoint p = canonical(sys, p0);
    const SuspensionPoint q = canonical(sys, q0);
    if (p.is_base() && q.is_base()) return distance(sys, p.x, q.x);
    if (!p.is_base() && !q.is_base()) {
        double d = std::abs(p.s - q.s) + distance(sys, p.x, q.x);
        d = std::min(d, (1 - p.s) + distance(sys, apply_reset(sys, p.x), q.x) + q.s);
        d = std::min(d, (1 - q.s) + distance(sys, apply_reset(sys, q.x), p.x) + p.s);
        return d;
    }
    const SuspensionPoint& b = p.is_base() ? p : q;
    const SuspensionPoint& c = p.is_base() ? q : p;
    return std::min(c.s + distance(sys, c.x, b.x), (1 - c.s) + distance(sys, apply_reset(sys, c.x), b.x));
}

SuspensionFlowResult phi(const HybridSystemDef& sys, double t, const SuspensionPoint& p0, const PhiOptions& opt) {
    if (!(t >= 0.0)) throw Error(ErrorKind::BadParameter, "suspension time must be non-negative");
    SuspensionFlowResult res;
    SuspensionPoint p = canonical(sys, p0);
    IntegratorOptions io;
    io.tol = opt.integrator_tol;
    io.record = false;
    // While only cylinder rides have happened, the fiber coordinate is
    // computed as (s_start + t) - k so that it stays exact.
    bool rides_only = !p.is_base();
    const double total = (p.is_base() ? 0.0 : p.s) + t;
    long full_rides = 0;
    double rem = t;
    for (long seg = 0;; ++seg) {
        if (seg > opt.max_segments) throw Error(ErrorKind::BudgetExceeded, "suspension flow needs too many segments");
        if (!p.is_base()) {
            const double s_end = rides_only ? total - static_cast<double>(full_rides) : p.s + rem;
            if (s_end < 1.0) {
                res.segments.push_back({true, s_end - p.s});
                res.endpoint = SuspensionPoint::cyl(p.x, s_end);
                return res;
            }
            res.segments.push_back({true, 1.0 - p.s});
            rem = rides_only ? total - static_cast<double>(full_rides + 1) : rem - (1.0 - p.s);
            ++full_rides;
            p = canonical(sys, SuspensionPoint::base(apply_reset(sys, p.x)));
            continue;
        }
        if (rem <= 0.0) {
            res.endpoint = p;
            return res;
        }
        rides_only = false;
        const ArcResult r = integrate_arc(sys, p.x, rem, io);
        res.segments.push_back({false, r.time});
        switch (r.kind) {
            case TerminalKind::GuardHit:
                rem -= r.time;
                p = SuspensionPoint::cyl(r.state, 0.0);
                if (rem <= 0.0) {
                    res.endpoint = p;
                    return res;
                }
                break;
            case TerminalKind::TimeOut:
                res.endpoint = canonical(sys, SuspensionPoint::base(r.state));
                return res;
            case TerminalKind::DomainExit:
                throw Error(ErrorKind::InvalidState, "suspension flow leaves the domain away from the guard");
        }
    }
}

ExecutionTrace relaxed_simulate(const RelaxedSystem& rs, const SuspensionPoint& s0, const SimBudget& budget) {
    const HybridSystemDef& sys = rs.base;
    ExecutionTrace tr;
    SuspensionPoint p = canonical(sys, s0);
    IntegratorOptions io;
    io.tol = budget.integrator_tol;
    io.event_tol = budget.event_tol;
    double t = 0.0;
    while (true) {
        if (!p.is_base()) {
            const double ride = 1.0 - p.s;
            Arc a;
            a.mode = p.x.mode;
            a.cylinder = true;
            a.t = {t, std::min(t + ride, budget.max_time)};
            a.x = {p.x.x, p.x.x};
            tr.arcs.push_back(std::move(a));
            if (t + ride > budget.max_time) {
                tr.cls.kind = ExecClass::Infinite;
                tr.cls.horizon = budget.max_time;
                tr.cls.reason = "time horizon reached";
                tr.cls.final_state = p.x;
                break;
            }
            t += ride;
            if (tr.n_jumps >= budget.max_jumps) {
                tr.cls.kind = ExecClass::BudgetTruncated;
                tr.cls.horizon = t;
                tr.cls.reason = "jump budget exhausted";
                tr.cls.final_state = p.x;
                break;
            }
            State img = apply_reset(sys, p.x, budget.event_tol);
            tr.jumps.push_back(Jump{t, p.x, img, guard_at(sys, p.x, budget.event_tol).value_or(-1)});
            ++tr.n_jumps;
            p = canonical(sys, SuspensionPoint::base(std::move(img)));
            continue;
        }
        if (t >= budget.max_time) {
            tr.cls.kind = ExecClass::Infinite;
            tr.cls.horizon = t;
            tr.cls.reason = "time horizon reached";
            tr.cls.final_state = p.x;
            break;
        }
        ArcResult r = integrate_arc(sys, p.x, budget.max_time - t, io);
        for (double& v : r.arc.t) v += t;
        tr.arcs.push_back(std::move(r.arc));
        t += r.time;
        if (r.kind == TerminalKind::GuardHit) {
            p = SuspensionPoint::cyl(r.state, 0.0);
            continue;
        }
        tr.cls.final_state = r.state;
        tr.cls.horizon = t;
        if (r.kind == TerminalKind::TimeOut) {
            tr.cls.kind = ExecClass::Infinite;
            tr.cls.reason = "time horizon reached";
        } else {
            tr.cls.kind = ExecClass::Blocked;
            tr.cls.reason = "flow leaves the domain away from the guard";
        }
        break;
    }
    return tr;
}

std::vector<SuspensionSample> suspension_trace(const HybridSystemDef& sys, const SuspensionPoint& p, double t_end,
                                               double dt) {
    if (!(dt > 0)) throw Error(ErrorKind::BadParameter, "trace step must be positive");
    std::vector<SuspensionSample> out;
    SuspensionPoint cur = canonical(sys, p);
    out.push_back({0.0, cur});
    const long n = static_cast<long>(std::floor(t_end / dt + 1e-9));
    for (long k = 1; k <= n; ++k) {
        cur = phi(sys, dt, cur).endpoint;
        out.push_back({static_cast<double>(k) * dt, cur});
    }
    return out;
}

ClassicalReport classical_suspension_check(const HybridSystemDef& sys, int n_samples, std::uint64_t seed,
                                           double t_max) {
    ClassicalReport rep;
    const ModeSpec& m = sys.mode(0);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::pair<Vec, double>> cases;
    Vec origin = m.domain.lo;
    cases.push_back({origin, 2.25});
    cases.push_back({origin, 0.0});
    cases.push_back({origin, 1.0});
    for (int i = 0; i < n_samples; ++i) {
        Vec x(m.dim);
        for (int d = 0; d < m.dim; ++d) x[d] = m.domain.lo[d] + unit(rng) * (m.domain.hi[d] - m.domain.lo[d]);
        cases.push_back({std::move(x), unit(rng) * t_max});
    }
    for (auto& [x, t] : cases) {
        ++rep.checked;
        State s{0, x};
        wrap_periodic(m, s.x);
        if (!on_guard(sys, s)) {
            ++rep.mismatches;
            rep.details.push_back("sample is in the flow set; the system is not a pure map");
            continue;
        }
        const double k = std::floor(t);
        State z = s;
        for (long i = 0; i < static_cast<long>(k); ++i) z = apply_reset(sys, z);
        const double s_expected = t - k;
        const SuspensionPoint got = phi(sys, t, SuspensionPoint::base(s)).endpoint;
        if (got.is_base()) {
            ++rep.mismatches;
            rep.details.push_back("endpoint left the cylinder");
            continue;
        }
        const double base_err = distance(sys, got.x, z);
        const double s_err = std::abs(got.s - s_expected);
        rep.max_base_error = std::max(rep.max_base_error, base_err);
        rep.max_s_error = std::max(rep.max_s_error, s_err);
        if (got.s != s_expected || base_err > 1e-12) {
            ++rep.mismatches;
            std::ostringstream os;
            os << "t=" << t << ": s " << got.s << " vs " << s_expected << ", base error " << base_err;
            rep.details.push_back(os.str());
        }
    }
    return rep;
}

namespace {

Vec random_direction(std::mt19937_64& rng, int dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec v(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        norm = 0.0;
        for (auto& c : v) {
            c = n(rng);
            norm += c * c;
        }
    }
    norm = std::sqrt(norm);
    for (auto& c : v) c /= norm;
    return v;
}

std::vector<State> all_guard_samples(const HybridSystemDef& sys) {
    std::vector<State> out;
    for (int m = 0; m < static_cast<int>(sys.modes.size()); ++m) {
        for (int gi = 0; gi < static_cast<int>(sys.modes[m].guards.size()); ++gi) {
            for (Vec& p : sample_guard(sys.modes[m], gi)) out.push_back(State{m, std::move(p)});
        }
    }
    return out;
}

}  // namespace

std::optional<ContinuityWitness> suspension_continuity_check(const HybridSystemDef& sys,
                                                             const ContinuityOptions& opt) {
    const auto guard = all_guard_samples(sys);
    if (guard.empty()) return std::nullopt;
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, guard.size() - 1);
    for (int i = 0; i < opt.n_pairs; ++i) {
        State p = guard[pick(rng)];
        const int dim = static_cast<int>(p.x.size());
        if (unit(rng) >= 0.25) {
            const Vec dir = random_direction(rng, dim);
            const double r = opt.radius * unit(rng);
            for (int d = 0; d < dim; ++d) p.x[d] += r * dir[d];
        }
        State q = p;
        const Vec dir = random_direction(rng, dim);
        const double r = opt.delta * unit(rng);
        for (int d = 0; d < dim; ++d) q.x[d] += r * dir[d];
        if (!in_domain(sys, p, 0.0) || !in_domain(sys, q, 0.0)) continue;
        try {
            const auto a = phi(sys, opt.t, embed(p)).endpoint;
            const auto b = phi(sys, opt.t, embed(q)).endpoint;
            const double out = suspension_distance(sys, a, b);
            if (out > opt.threshold) {
                return ContinuityWitness{embed(p), embed(q), a, b, distance(sys, p, q), out};
            }
        } catch (const Error&) {
            continue;
        }
    }
    return std::nullopt;
}

namespace {

std::string fmt_state(const State& s) {
    std::ostringstream os;
    os << "mode " << s.mode << " (";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << (i ? ", " : "") << s.x[i];
    os << ")";
    return os.str();
}

// Uniform point of a random mode that lies in the domain and off the guard.
std::optional<State> random_flow_point(const HybridSystemDef& sys, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick_mode(0, static_cast<int>(sys.modes.size()) - 1);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const ModeSpec& m = sys.mode(pick_mode(rng));
        State s{m.id, Vec(m.dim)};
        for (int i = 0; i < m.dim; ++i) {
            s.x[i] = std::uniform_real_distribution<double>(m.domain.lo[i], m.domain.hi[i])(rng);
        }
        if (in_domain(sys, s, 0.0) && !on_guard(sys, s)) return s;
    }
    return std::nullopt;
}

void note(FlowLawReport& rep, double err, double allowed, const std::string& where) {
    ++rep.checked;
    rep.max_error = std::max(rep.max_error, err);
    rep.worst_ratio = std::max(rep.worst_ratio, err / allowed);
    if (!(err <= allowed) && rep.failures.size() < 10) {
        std::ostringstream os;
        os << where << ": error " << err << " above " << allowed;
        rep.failures.push_back(os.str());
    }
}

}  // namespace

FlowLawReport semigroup_check(const HybridSystemDef& sys, int n_samples, std::uint64_t seed, double t_max,
                              double tol) {
    FlowLawReport rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto guard = all_guard_samples(sys);
    PhiOptions po;
    po.integrator_tol = tol;
    for (int i = 0; i < n_samples; ++i) {
        SuspensionPoint p;
        if (!guard.empty() && unit(rng) < 0.25) {
            p = SuspensionPoint::cyl(guard[std::uniform_int_distribution<std::size_t>(0, guard.size() - 1)(rng)],
                                     unit(rng));
        } else {
            auto x = random_flow_point(sys, rng);
            if (!x) continue;
            p = embed(*x);
        }
        const double total = t_max * unit(rng);
        const double s = total * unit(rng);
        const double t = total - s;
        try {
            const auto whole = phi(sys, t + s, p, po).endpoint;
            const auto split = phi(sys, t, phi(sys, s, p, po).endpoint, po).endpoint;
            std::ostringstream os;
            os << "p=" << fmt_state(p.x) << (p.is_base() ? "" : " cyl") << " t=" << t << " s=" << s;
            note(rep, suspension_distance(sys, whole, split), 10 * tol * (1 + t + s), os.str());
        } catch (const Error& e) {
            rep.failures.push_back(std::string("phi failed: ") + e.what());
        }
    }
    return rep;
}

FlowLawReport conjugacy_check(const HybridSystemDef& sys, int n_samples, std::uint64_t seed, double tol) {
    FlowLawReport rep;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    IntegratorOptions io;
    io.tol = tol;
    io.record = false;
    PhiOptions po;
    po.integrator_tol = tol;
    for (int i = 0; i < n_samples; ++i) {
        auto x = random_flow_point(sys, rng);
        if (!x) continue;
        try {
            const FlowTime mu = max_flow_time(sys, *x, 50.0, io);
            const double t = (mu.finite ? mu.mu : 50.0) * unit(rng);
            const ArcResult r = integrate_arc(sys, *x, t, io);
            if (r.kind != TerminalKind::TimeOut) continue;
            const auto got = phi(sys, t, embed(*x), po).endpoint;
            std::ostringstream os;
            os << "x=" << fmt_state(*x) << " t=" << t;
            note(rep, suspension_distance(sys, got, embed(r.state)), 10 * tol * (1 + t), os.str());
        } catch (const Error& e) {
            rep.failures.push_back(std::string("phi failed: ") + e.what());
        }
    }
    return rep;
}

SuspensionGraph build_suspension_graph(const HybridSystemDef& sys, const TransitionGraph& g, double phi_step,
                                       double radius) {
    SuspensionGraph sg;
    const double h = g.grid.h();
    sg.n_base = g.size();
    sg.n_cells = std::max(1, static_cast<int>(std::ceil(1.0 / h - 1e-9)));
    for (int u = 0; u < g.size(); ++u) {
        if (g.guard_box[u]) sg.guard_boxes.push_back(u);
    }
    const int total = sg.n_base + static_cast<int>(sg.guard_boxes.size()) * sg.n_cells;
    sg.out.assign(total, {});

    auto lattice = [&](int u) {
        const Box b = g.grid.cell_box(g.nodes[u]);
        std::vector<Vec> pts{Vec{}};
        for (int d = 0; d < b.dim(); ++d) {
            std::vector<Vec> next;
            for (const Vec& p : pts) {
                for (int k = 0; k < 3; ++k) {
                    Vec q = p;
                    q.push_back(b.lo[d] + 0.5 * k * (b.hi[d] - b.lo[d]));
                    next.push_back(std::move(q));
                    if (b.hi[d] == b.lo[d]) break;
                }
            }
            pts = std::move(next);
        }
        return pts;
    };
    auto connect = [&](int src, const SuspensionPoint& p) {
        try {
            const SuspensionPoint e = phi(sys, phi_step, p).endpoint;
            for (int v : suspension_nodes_near(sys, g, sg, e, radius)) sg.out[src].push_back(v);
        } catch (const Error&) {
        }
    };
    for (int u = 0; u < g.size(); ++u) {
        for (Vec& x : lattice(u)) {
            State s{g.nodes[u].mode, std::move(x)};
            if (in_domain(sys, s)) connect(u, SuspensionPoint::base(std::move(s)));
        }
    }
    for (std::size_t gi = 0; gi < sg.guard_boxes.size(); ++gi) {
        const int u = sg.guard_boxes[gi];
        std::vector<State> zs;
        for (Vec& x : lattice(u)) {
            State s{g.nodes[u].mode, std::move(x)};
            if (in_domain(sys, s) && on_guard(sys, s)) zs.push_back(std::move(s));
        }
        for (int j = 0; j < sg.n_cells; ++j) {
            const int id = sg.n_base + static_cast<int>(gi) * sg.n_cells + j;
            const double s_lo = j * h, s_hi = std::min((j + 1) * h, 1.0);
            for (const State& z : zs) {
                for (double s : {s_lo, 0.5 * (s_lo + s_hi), s_hi}) {
                    if (s >= 1.0) s = std::nextafter(1.0, 0.0);
                    connect(id, SuspensionPoint::cyl(z, s));
                }
            }
        }
    }
    for (auto& o : sg.out) {
        std::sort(o.begin(), o.end());
        o.erase(std::unique(o.begin(), o.end()), o.end());
    }
    return sg;
}

std::vector<int> suspension_nodes_near(const HybridSystemDef& sys, const TransitionGraph& g,
                                       const SuspensionGraph& sg, const SuspensionPoint& p0, double radius) {
    const double h = g.grid.h();
    const double r = radius < 0 ? h : radius;
    const SuspensionPoint p = canonical(sys, p0);
    std::vector<int> out;
    auto cyl_cells = [&](const State& z, double s_lo, double s_hi, double rz) {
        const int j0 = std::clamp(static_cast<int>(std::floor(s_lo / h)), 0, sg.n_cells - 1);
        const int j1 = std::clamp(static_cast<int>(std::floor(s_hi / h)), 0, sg.n_cells - 1);
        for (int v : g.nodes_near(z, rz)) {
            const auto it = std::lower_bound(sg.guard_boxes.begin(), sg.guard_boxes.end(), v);
            if (it == sg.guard_boxes.end() || *it != v) continue;
            const int gi = static_cast<int>(it - sg.guard_boxes.begin());
            for (int jj = j0; jj <= j1; ++jj) out.push_back(sg.n_base + gi * sg.n_cells + jj);
        }
    };
    if (p.is_base()) {
        for (int v : g.nodes_near(p.x, r)) out.push_back(v);
        const int home = g.find(g.grid.cell_of(p.x));
        if (home >= 0) out.push_back(home);
        if (r > h) cyl_cells(p.x, 0.0, r - h, r - h);
    } else {
        cyl_cells(p.x, p.s - r, p.s + r, r);
        if (p.s < r) {
            for (int v : g.nodes_near(p.x, r - p.s)) out.push_back(v);
        }
        if (p.s > 1 - r) {
            const double left = r - (1 - p.s);
            const State img = apply_reset(sys, p.x);
            for (int v : g.nodes_near(img, left)) out.push_back(v);
            if (on_guard(sys, img)) cyl_cells(img, 0.0, left, left);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

namespace {

std::set<BoxKey> suspension_tail(const HybridSystemDef& sys, const BoxGrid& grid, const State& x, double t0,
                                 double window) {
    std::set<BoxKey> out;
    SuspensionPoint p = phi(sys, t0, embed(x)).endpoint;
    const double dt = std::min(0.5 * grid.h(), 0.05);
    const long n = static_cast<long>(std::ceil(window / dt));
    for (long k = 0; k <= n; ++k) {
        out.insert(grid.cell_of(p.x));
        p = phi(sys, dt, p).endpoint;
    }
    return out;
}

bool covered(const std::set<BoxKey>& a, const std::set<BoxKey>& b) {
    for (const BoxKey& k : a) {
        bool ok = false;
        for (const BoxKey& o : b) {
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

CompatibilityReport suspension_compatibility_check(const HybridSystemDef& sys, const TransitionGraph& graph,
                                                   const std::vector<State>& samples,
                                                   const CompatibilityOptions& opt) {
    CompatibilityReport rep;
    const BoxGrid& grid = graph.grid;
    OmegaOptions oo;
    oo.t_transient = opt.t_transient;
    oo.t_window = opt.t_window;
    for (const State& x : samples) {
        std::set<BoxKey> h_boxes;
        try {
            h_boxes = omega_limit_estimate(sys, x, grid.h(), oo);
        } catch (const Error& e) {
            rep.disagreements.push_back("omega of " + fmt_state(x) + " in H: " + e.what());
            continue;
        }
        const std::set<BoxKey> s_boxes = suspension_tail(sys, grid, x, opt.t_transient, opt.t_window);
        ++rep.omega_checked;
        if (!covered(h_boxes, s_boxes) || !covered(s_boxes, h_boxes)) {
            rep.disagreements.push_back("omega boxes of " + fmt_state(x) + " differ between H and the suspension");
        }
    }
    if (!opt.check_chains || samples.size() < 2) return rep;
    // Edges reach every node within eps of the time-phi_step image, so
    // reachability matches eps-chains of the suspension semiflow.
    const SuspensionGraph sg = build_suspension_graph(sys, graph, opt.phi_step, opt.eps);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const State& x = samples[i];
        const State& y = samples[(i + 1) % samples.size()];
        const bool h_yes = find_chain(sys, graph, x, y, opt.eps, opt.T).has_value();
        std::vector<bool> seen(sg.size(), false);
        std::deque<int> q;
        for (int v : suspension_nodes_near(sys, graph, sg, embed(x))) {
            seen[v] = true;
            q.push_back(v);
        }
        while (!q.empty()) {
            const int u = q.front();
            q.pop_front();
            for (int v : sg.out[u]) {
                if (!seen[v]) {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        bool s_yes = false;
        for (int v : suspension_nodes_near(sys, graph, sg, embed(y))) s_yes = s_yes || seen[v];
        ++rep.chain_checked;
        // A found chain is validated and the suspension graph is an outer
        // approximation, so only "H yes, suspension no" contradicts; the
        // other mismatch means the chain search gave up.
        if (!h_yes && s_yes) ++rep.chain_undecided;
        if (h_yes && !s_yes) {
            rep.disagreements.push_back("chain verdict " + fmt_state(x) + " -> " + fmt_state(y) + ": H " +
                                        (h_yes ? "yes" : "no") + ", suspension " + (s_yes ? "yes" : "no"));
        }
    }
    return rep;
}

}  // namespace hcd
