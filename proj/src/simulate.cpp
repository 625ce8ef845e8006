#include "hcd/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dopri.hpp"
#include "hcd/error.hpp"

namespace hcd {

const char* to_string(TerminalKind k) {
    switch (k) {
        case TerminalKind::GuardHit: return "GuardHit";
        case TerminalKind::TimeOut: return "TimeOut";
        case TerminalKind::DomainExit: return "DomainExit";
    }
    return "Unknown";
}

const char* to_string(ExecClass c) {
    switch (c) {
        case ExecClass::Infinite: return "Infinite";
        case ExecClass::Zeno: return "Zeno";
        case ExecClass::Blocked: return "Blocked";
        case ExecClass::BudgetTruncated: return "BudgetTruncated";
    }
    return "Unknown";
}

namespace {

bool all_finite(const Vec& v) {
    return std::all_of(v.begin(), v.end(), [](double a) { return std::isfinite(a); });
}

struct Crossing {
    double theta = 2.0;
    Vec y;
};

// Locates the first + to - crossing of psi inside the accepted step [0, h]
// (theta in (0, 1]). Step endpoints come from a fresh single step of size
// theta*h so the refined root agrees with the 5th-order solution.
std::optional<Crossing> find_crossing(const detail::Dopri& dp, const Vec& y0, const Vec& y1, double h,
                                      const Polynomial& psi, double event_tol, double t) {
    const double pa = psi.eval(y0);
    if (pa < -event_tol) return std::nullopt;
    auto at = [&](double theta) { return theta >= 1.0 ? y1 : dp.single(y0, theta * h); };

    double hi = -1.0;
    Vec yhi;
    for (double th : {0.25, 0.5, 0.75, 1.0}) {
        const Vec probe = th >= 1.0 ? y1 : dp.dense(th);
        if (psi.eval(probe) <= 0.0) {
            Vec exact = at(th);
            if (psi.eval(exact) <= 0.0) {
                hi = th;
                yhi = std::move(exact);
                break;
            }
        }
    }
    if (hi < 0) return std::nullopt;

    double lo = 0.0;
    if (pa <= 0.0) {
        // Started on the surface: a crossing needs the trajectory to go
        // strictly positive first, otherwise it is leaving the guard.
        bool found = false;
        for (int k = 1; k <= 60; ++k) {
            const double th = hi * std::ldexp(1.0, -k);
            if (psi.eval(at(th)) > 0.0) {
                lo = th;
                found = true;
                break;
            }
        }
        if (!found) return std::nullopt;
        // The first positive probe may lie beyond a later sign change; move
        // hi down to the first non-positive point after lo.
    }

    const double width_tol = 1e-13 * (1.0 + std::abs(t));
    int it = 0;
    while ((hi - lo) * h > width_tol) {
        if (++it > 128) throw Error(ErrorKind::StepUnderflow, "guard bisection did not converge");
        const double mid = 0.5 * (lo + hi);
        Vec ym = at(mid);
        if (psi.eval(ym) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
            yhi = std::move(ym);
        }
    }
    Vec ylo = lo > 0.0 ? at(lo) : y0;
    Crossing c;
    if (std::abs(psi.eval(ylo)) < std::abs(psi.eval(yhi))) {
        c.theta = lo;
        c.y = std::move(ylo);
    } else {
        c.theta = hi;
        c.y = std::move(yhi);
    }
    if (std::abs(psi.eval(c.y)) >= event_tol) {
        throw Error(ErrorKind::StepUnderflow, "guard crossing could not be resolved within event tolerance");
    }
    return c;
}

}  // namespace

ArcResult integrate_arc(const HybridSystemDef& sys, const State& s0, double t_max, const IntegratorOptions& opt) {
    const ModeSpec& m = sys.mode(s0.mode);
    if (static_cast<int>(s0.x.size()) != m.dim) throw Error(ErrorKind::InvalidState, "state dimension mismatch");
    if (!all_finite(s0.x)) throw Error(ErrorKind::NonFiniteState, "non-finite initial state");

    ArcResult res;
    res.arc.mode = s0.mode;
    Vec y = s0.x;
    wrap_periodic(m, y);
    if (opt.record) {
        res.arc.t.push_back(0.0);
        res.arc.x.push_back(y);
    }
    const std::size_t n = static_cast<std::size_t>(m.dim);
    detail::Dopri dp(m.field);
    Vec f0(n);
    dp.rhs(y, f0);

    std::vector<Polynomial> lie;
    lie.reserve(m.guards.size());
    for (const auto& g : m.guards) lie.push_back(lie_derivative(g.psi, m.field));

    auto in_dom = [&](const Vec& x) {
        State s{s0.mode, x};
        wrap_periodic(m, s.x);
        return in_domain(sys, s, opt.domain_tol);
    };

    auto finish = [&](TerminalKind kind, Vec x, double t, int guard) {
        wrap_periodic(m, x);
        if (opt.record && (res.arc.t.empty() || res.arc.t.back() < t)) {
            res.arc.t.push_back(t);
            res.arc.x.push_back(x);
        }
        res.kind = kind;
        res.state = State{s0.mode, std::move(x)};
        res.time = t;
        res.guard = guard;
        return res;
    };

    double t = 0.0;
    double h = std::min(opt.max_step, t_max);
    bool first = true;
    while (t_max - t > 1e-15 * (1.0 + t)) {
        h = std::min({h, opt.max_step, t_max - t});
        const double err = dp.step(y, f0, h, opt.tol);
        const Vec& y1 = dp.y1();
        if (!all_finite(y1) || !std::isfinite(err) || err > 1.0) {
            const double fac = std::isfinite(err) && err > 0 ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.25;
            h *= std::min(fac, 0.9);
            if (h < 1e-14 * (1.0 + t)) {
                if (!all_finite(y1)) throw Error(ErrorKind::NonFiniteState, "trajectory became non-finite");
                throw Error(ErrorKind::StepUnderflow, "integrator step size underflow");
            }
            continue;
        }

        int best_g = -1;
        Crossing best;
        for (std::size_t g = 0; g < m.guards.size(); ++g) {
            const auto& gc = m.guards[g];
            if (gc.psi.is_zero()) continue;
            if (first && opt.skip_start_surface && std::abs(gc.psi.eval(y)) <= opt.event_tol) continue;
            auto c = find_crossing(dp, y, y1, h, gc.psi, opt.event_tol, t);
            if (!c) continue;
            if (!guard_active(gc, c->y, opt.event_tol)) continue;
            if (lie[g].eval(c->y) > 1e-8) continue;
            if (c->theta < best.theta) {
                best = std::move(*c);
                best_g = static_cast<int>(g);
            }
        }

        if (!in_dom(y1)) {
            double lo = 0.0, hi = 1.0;
            Vec ylo = y;
            for (int it = 0; it < 128 && (hi - lo) * h > 1e-13 * (1.0 + t); ++it) {
                const double mid = 0.5 * (lo + hi);
                Vec ym = dp.single(y, mid * h);
                if (in_dom(ym)) {
                    lo = mid;
                    ylo = std::move(ym);
                } else {
                    hi = mid;
                }
            }
            if (best_g < 0 || lo < best.theta) {
                return finish(TerminalKind::DomainExit, std::move(ylo), t + lo * h, -1);
            }
        }
        if (best_g >= 0) {
            return finish(TerminalKind::GuardHit, std::move(best.y), t + best.theta * h, best_g);
        }

        if (opt.record && opt.sample_spacing > 0.0) {
            double dist = 0.0;
            for (std::size_t i = 0; i < n; ++i) dist += (y1[i] - y[i]) * (y1[i] - y[i]);
            const int sub = static_cast<int>(std::ceil(std::sqrt(dist) / opt.sample_spacing));
            for (int j = 1; j < sub; ++j) {
                const double th = static_cast<double>(j) / sub;
                Vec yd = dp.dense(th);
                wrap_periodic(m, yd);
                res.arc.t.push_back(t + th * h);
                res.arc.x.push_back(std::move(yd));
            }
        }
        t += h;
        Vec ynew = y1;
        wrap_periodic(m, ynew);
        if (ynew == y1) {
            f0 = dp.f1();
        } else {
            dp.rhs(ynew, f0);
        }
        y = std::move(ynew);
        if (opt.record) {
            res.arc.t.push_back(t);
            res.arc.x.push_back(y);
        }
        first = false;
        const double fac = err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        h *= std::clamp(fac, 0.2, 5.0);
    }
    return finish(TerminalKind::TimeOut, std::move(y), t_max, -1);
}

Vec flow_free(const PolyMap& field, const Vec& x0, double t, double tol) {
    if (t == 0.0) return x0;
    const double sign = t < 0 ? -1.0 : 1.0;
    const double T = std::abs(t);
    detail::Dopri dp(field, sign);
    Vec y = x0;
    Vec f0(y.size());
    dp.rhs(y, f0);
    double s = 0.0;
    double h = std::min(0.1, T);
    while (T - s > 1e-15 * (1.0 + T)) {
        h = std::min(h, T - s);
        const double err = dp.step(y, f0, h, tol);
        if (!all_finite(dp.y1()) || !std::isfinite(err) || err > 1.0) {
            h *= 0.25;
            if (h < 1e-14 * (1.0 + s)) throw Error(ErrorKind::StepUnderflow, "free flow step size underflow");
            continue;
        }
        s += h;
        y = dp.y1();
        f0 = dp.f1();
        h *= std::clamp(err > 0 ? 0.9 * std::pow(err, -0.2) : 5.0, 0.2, 5.0);
        h = std::min(h, 0.1);
    }
    return y;
}

FlowTime max_flow_time(const HybridSystemDef& sys, const State& s, double horizon, const IntegratorOptions& opt) {
    if (on_guard(sys, s, opt.event_tol)) return {true, 0.0};
    IntegratorOptions o = opt;
    o.record = false;
    const ArcResult r = integrate_arc(sys, s, horizon, o);
    if (r.kind == TerminalKind::TimeOut) return {false, horizon};
    return {true, r.time};
}

State apply_reset(const HybridSystemDef& sys, const State& s, double event_tol) {
    const auto g = guard_at(sys, s, event_tol);
    if (!g) throw Error(ErrorKind::NotOnGuard, "reset applied at a state outside the guard");
    const GuardComponent& gc = sys.mode(s.mode).guards[*g];
    const ModeSpec& tm = sys.mode(gc.target);
    State out{gc.target, eval(gc.reset, s.x)};
    wrap_periodic(tm, out.x);
    for (int i = 0; i < tm.dim; ++i) {
        if (!tm.periodic.empty() && tm.periodic[i]) continue;
        const double lo = tm.domain.lo[i], hi = tm.domain.hi[i];
        double& v = out.x[i];
        if (v < lo - event_tol || v > hi + event_tol) {
            throw Error(ErrorKind::ResetOutOfDomain, "reset image lies outside the target domain");
        }
        v = std::clamp(v, lo, hi);
    }
    if (!in_domain(sys, out)) throw Error(ErrorKind::ResetOutOfDomain, "reset image violates target constraints");
    return out;
}

double ExecutionTrace::end_time() const {
    for (auto it = arcs.rbegin(); it != arcs.rend(); ++it) {
        if (!it->t.empty()) return it->t.back();
    }
    return jumps.empty() ? 0.0 : jumps.back().time;
}

std::vector<double> ExecutionTrace::jump_times() const {
    std::vector<double> out{0.0};
    for (const auto& j : jumps) out.push_back(j.time);
    return out;
}

bool zeno_gap_test(const std::vector<double>& jump_times, int window, double& stop, double& ratio) {
    const int n = static_cast<int>(jump_times.size()) - 1;
    if (window < 2 || n < window + 1) return false;
    std::vector<double> gaps;
    for (int i = n - window + 1; i <= n; ++i) gaps.push_back(jump_times[i] - jump_times[i - 1]);
    const double tn = jump_times.back();
    const double zero = 1e-14 * (1.0 + std::abs(tn));
    if (std::all_of(gaps.begin(), gaps.end(), [&](double g) { return g <= zero; })) {
        // The jumps have accumulated at tn; report the decay seen before.
        stop = tn;
        ratio = 0.0;
        std::vector<double> pos;
        for (int i = n; i >= 1 && static_cast<int>(pos.size()) <= window; --i) {
            const double g = jump_times[i] - jump_times[i - 1];
            if (g > zero) pos.push_back(g);
        }
        if (pos.size() >= 2) {
            ratio = std::pow(pos.front() / pos.back(), 1.0 / static_cast<double>(pos.size() - 1));
        }
        return true;
    }
    double log_sum = 0.0;
    for (std::size_t i = 1; i < gaps.size(); ++i) {
        if (gaps[i - 1] <= zero) return false;
        const double r = gaps[i] / gaps[i - 1];
        if (!(r < 0.999) || r <= 0.0) return false;
        log_sum += std::log(r);
    }
    const double rho = std::exp(log_sum / static_cast<double>(gaps.size() - 1));
    if (!(rho < 0.999)) return false;
    ratio = rho;
    stop = tn + gaps.back() * rho / (1.0 - rho);
    return true;
}

ExecutionTrace simulate_execution(const HybridSystemDef& sys, const State& s0, const SimBudget& budget) {
    if (s0.mode < 0 || s0.mode >= static_cast<int>(sys.modes.size()) || !in_domain(sys, s0)) {
        throw Error(ErrorKind::InvalidState, "initial state is not in the hybrid domain");
    }
    IntegratorOptions opt;
    opt.tol = budget.integrator_tol;
    opt.event_tol = budget.event_tol;

    ExecutionTrace tr;
    State cur = s0;
    wrap_periodic(sys.mode(cur.mode), cur.x);
    double t = 0.0;
    bool need_arc = true;
    auto point_arc = [&] {
        Arc a;
        a.mode = cur.mode;
        a.t.push_back(t);
        a.x.push_back(cur.x);
        tr.arcs.push_back(std::move(a));
    };
    while (true) {
        const auto g = guard_at(sys, cur, budget.event_tol);
        if (g) {
            if (need_arc) point_arc();
            need_arc = true;
            if (tr.n_jumps >= budget.max_jumps) {
                double stop = 0, ratio = 0;
                if (zeno_gap_test(tr.jump_times(), budget.zeno_ratio_window, stop, ratio)) {
                    tr.cls.kind = ExecClass::Zeno;
                    tr.cls.stop_time = stop;
                    tr.cls.zeno_ratio = ratio;
                    tr.cls.reason = "jump gaps decay geometrically";
                } else {
                    tr.cls.kind = ExecClass::BudgetTruncated;
                    tr.cls.reason = "jump budget exhausted without geometric gap decay";
                }
                tr.cls.horizon = t;
                break;
            }
            State post = apply_reset(sys, cur, budget.event_tol);
            tr.jumps.push_back(Jump{t, cur, post, *g});
            ++tr.n_jumps;
            cur = std::move(post);
            continue;
        }
        if (t >= budget.max_time) {
            if (need_arc) point_arc();
            tr.cls.kind = ExecClass::Infinite;
            tr.cls.horizon = t;
            tr.cls.reason = "time horizon reached";
            break;
        }
        ArcResult r = integrate_arc(sys, cur, budget.max_time - t, opt);
        for (auto& v : r.arc.t) v += t;
        tr.arcs.push_back(std::move(r.arc));
        need_arc = false;
        t += r.time;
        cur = std::move(r.state);
        if (r.kind == TerminalKind::TimeOut) {
            t = budget.max_time;
            tr.cls.kind = ExecClass::Infinite;
            tr.cls.horizon = t;
            tr.cls.reason = "time horizon reached";
            break;
        }
        if (r.kind == TerminalKind::DomainExit) {
            tr.cls.kind = ExecClass::Blocked;
            tr.cls.horizon = t;
            tr.cls.reason = "flow leaves the domain away from the guard";
            break;
        }
    }
    tr.cls.final_state = cur;
    return tr;
}

}  // namespace hcd
