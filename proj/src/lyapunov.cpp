#include "hcd/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "hcd/error.hpp"
#include "hcd/simulate.hpp"

namespace hcd {

double LyapunovCandidate::operator()(const State& s) const {
    switch (kind) {
        case CandidateKind::BallStock: return oracle::ball_lyapunov(s.x.at(0), s.x.at(1), a, b, g);
        case CandidateKind::SpringStock: return oracle::spring_lyapunov(s.x.at(0), s.x.at(1), a, b);
        case CandidateKind::Constant: return c;
    }
    return c;
}

std::string LyapunovCandidate::describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind) {
        case CandidateKind::BallStock: os << "a*mu + b*sqrt(y^2/2 + g*x), a=" << a << " b=" << b << " g=" << g; break;
        case CandidateKind::SpringStock: os << "a*rho*mu + b*rho, a=" << a << " b=" << b; break;
        case CandidateKind::Constant: os << "constant " << c; break;
    }
    return os.str();
}

LyapunovCandidate stock_candidate(BuiltinId id, const BuiltinParams& p) {
    LyapunovCandidate c;
    if (id == BuiltinId::BouncingBall) {
        c.kind = CandidateKind::BallStock;
        c.b = oracle::ball_default_b();
        c.a = oracle::ball_default_a(p.g, p.d, c.b);
        c.g = p.g;
    } else if (id == BuiltinId::SpringBall) {
        c.kind = CandidateKind::SpringStock;
        c.b = 1.0;
        c.a = oracle::spring_default_a(p.d, c.b);
    } else {
        throw Error(ErrorKind::BadParameter, std::string("no closed-form candidate for ") + to_string(id));
    }
    return c;
}

LyapunovCandidate constant_candidate(double value) {
    LyapunovCandidate c;
    c.kind = CandidateKind::Constant;
    c.c = value;
    return c;
}

RecurrenceOracle recurrence_oracle(BuiltinId id, const BuiltinParams& p) {
    RecurrenceOracle r;
    r.class_of = [](const State&) { return 0; };
    auto everything = [&](const char* what) {
        r.recurrent = [](const State&) { return true; };
        r.description = what;
    };
    switch (id) {
        case BuiltinId::BouncingBall:
        case BuiltinId::SpringBall:
            if (p.d >= 1.0) {
                everything("all of I");
            } else {
                r.recurrent = [](const State& s) { return std::hypot(s.x[0], s.x[1]) < 1e-12; };
                r.representatives = {State{0, {0.0, 0.0}}};
                r.description = "origin";
            }
            break;
        case BuiltinId::Counterexample:
            r.recurrent = [](const State& s) { return s.mode == 0 || s.x[0] <= 2.0; };
            r.representatives = {State{0, {-1.0}}, State{0, {0.0}}, State{1, {1.0}}, State{1, {2.0}}};
            r.description = "[-1,0] u [1,2]";
            break;
        case BuiltinId::OmegaPathology:
            r.recurrent = [](const State& s) { return (s.mode == 0 && s.x[0] > -3.0) || s.mode == 2; };
            r.class_of = [](const State& s) { return s.mode == 2 ? 1 : 0; };
            r.representatives = {State{0, {-2.5}}, State{0, {-2.0}}, State{2, {1.0}}};
            r.description = "(-3,-2] u {1}";
            break;
        case BuiltinId::CircleRotation: everything("all of I"); break;
        case BuiltinId::GradientFlow:
            r.recurrent = [](const State& s) {
                return std::abs(s.x[1]) < 1e-12 && (std::abs(s.x[0]) < 1e-12 || std::abs(std::abs(s.x[0]) - 1) < 1e-12);
            };
            r.class_of = [](const State& s) { return s.x[0] < -0.5 ? 0 : (s.x[0] > 0.5 ? 2 : 1); };
            r.representatives = {State{0, {-1.0, 0.0}}, State{0, {0.0, 0.0}}, State{0, {1.0, 0.0}}};
            r.description = "equilibria (-1,0), (0,0), (1,0)";
            break;
    }
    return r;
}

RecurrenceOracle recurrence_from_boxes(const TransitionGraph& g, const ChainClassSet& c) {
    RecurrenceOracle r;
    r.recurrent = [&g, &c](const State& s) {
        for (int v : g.nodes_containing(s)) {
            if (c.node_recurrent[v]) return true;
        }
        return false;
    };
    r.class_of = [&g, &c](const State& s) {
        for (int v : g.nodes_containing(s)) {
            if (c.node_recurrent[v]) return c.scc_of[v];
        }
        return -1;
    };
    r.description = "recurrent boxes";
    return r;
}

namespace {

Vec uniform_in(const Box& b, std::mt19937_64& rng) {
    Vec x(b.dim());
    for (int i = 0; i < b.dim(); ++i) {
        x[i] = b.lo[i] == b.hi[i] ? b.lo[i] : std::uniform_real_distribution<double>(b.lo[i], b.hi[i])(rng);
    }
    return x;
}

// Newton projection onto psi = 0, as in guard sampling.
bool project_to_guard(const ModeSpec& m, const GuardComponent& g, Vec& p) {
    if (g.psi.is_zero()) return true;
    for (int it = 0; it < 40; ++it) {
        const double v = g.psi.eval(p);
        if (std::abs(v) < 1e-13) return true;
        Vec gr(m.dim);
        double n2 = 0.0;
        for (int i = 0; i < m.dim; ++i) {
            gr[i] = g.psi.partial(i).eval(p);
            n2 += gr[i] * gr[i];
        }
        if (n2 == 0.0) return false;
        for (int i = 0; i < m.dim; ++i) p[i] -= v * gr[i] / n2;
    }
    return std::abs(g.psi.eval(p)) < 1e-10;
}

}  // namespace

LyapunovReport verify_lyapunov(const HybridSystemDef& sys, const LyapunovCandidate& cand,
                               const RecurrenceOracle& rec, const LyapunovOptions& opt) {
    LyapunovReport rep;
    std::mt19937_64 rng(opt.seed);
    const int nmodes = static_cast<int>(sys.modes.size());
    std::uniform_int_distribution<int> pick_mode(0, nmodes - 1);
    std::map<int, std::pair<double, double>> class_range;
    auto note_class = [&](const State& s) {
        const double v = cand(s);
        auto [it, fresh] = class_range.try_emplace(rec.class_of(s), v, v);
        if (!fresh) {
            it->second.first = std::min(it->second.first, v);
            it->second.second = std::max(it->second.second, v);
        }
        ++rep.class_checked;
    };
    for (const State& s : rec.representatives) {
        if (in_domain(sys, s)) note_class(s);
    }

    IntegratorOptions iopt;
    iopt.record = false;
    for (int i = 0; i < opt.n_samples; ++i) {
        // Flow sample.
        State s{pick_mode(rng), {}};
        s.x = uniform_in(sys.mode(s.mode).domain, rng);
        if (in_domain(sys, s, 0.0)) {
            if (rec.recurrent(s)) {
                note_class(s);
            } else if (!on_guard(sys, s) && !sys.mode(s.mode).field.empty()) {
                try {
                    const FlowTime mu = max_flow_time(sys, s, 10 * opt.flow_dt);
                    const double t = mu.finite ? std::min(opt.flow_dt, 0.5 * mu.mu) : opt.flow_dt;
                    if (t > 1e-9) {
                        const ArcResult r = integrate_arc(sys, s, t, iopt);
                        if (r.time > 1e-9 && !rec.recurrent(r.state)) {
                            const double m = (cand(r.state) - cand(s)) / r.time;
                            rep.worst_flow_margin = std::max(rep.worst_flow_margin, m);
                            ++rep.flow_checked;
                        }
                    }
                } catch (const Error&) {
                }
            }
        }
        // Guard sample.
        const ModeSpec& m = sys.mode(pick_mode(rng));
        if (m.guards.empty()) continue;
        const int gi = std::uniform_int_distribution<int>(0, static_cast<int>(m.guards.size()) - 1)(rng);
        State z{m.id, uniform_in(m.domain, rng)};
        if (!project_to_guard(m, m.guards[gi], z.x)) continue;
        if (!guard_active(m.guards[gi], z.x, Tolerances{}.event) || !in_domain(sys, z, 0.0)) continue;
        if (guard_at(sys, z) != gi || rec.recurrent(z)) continue;
        try {
            const State img = apply_reset(sys, z);
            const double margin = cand(img) - cand(z);
            rep.worst_reset_margin = std::max(rep.worst_reset_margin, margin);
            rep.resets.push_back({z, margin});
            ++rep.reset_checked;
        } catch (const Error&) {
        }
    }
    for (const auto& [cls, range] : class_range) {
        rep.max_class_spread = std::max(rep.max_class_spread, range.second - range.first);
    }
    std::ostringstream os;
    if (rep.flow_checked > 0 && !(rep.worst_flow_margin < 0)) {
        os << "flow margin " << rep.worst_flow_margin << " is not negative";
        rep.failures.push_back(os.str());
        os.str("");
    }
    if (rep.reset_checked > 0 && !(rep.worst_reset_margin < 0)) {
        os << "reset margin " << rep.worst_reset_margin << " is not negative";
        rep.failures.push_back(os.str());
        os.str("");
    }
    if (rep.max_class_spread > opt.class_tol) {
        os << "candidate varies by " << rep.max_class_spread << " on a recurrent class";
        rep.failures.push_back(os.str());
    }
    return rep;
}

}  // namespace hcd
