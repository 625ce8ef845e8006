#include "hcd/system.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace hcd {

bool in_domain(const HybridSystemDef& sys, const State& s, double tol) {
    if (s.mode < 0 || s.mode >= static_cast<int>(sys.modes.size())) return false;
    const ModeSpec& m = sys.mode(s.mode);
    if (static_cast<int>(s.x.size()) != m.dim) return false;
    double scale = 1.0;
    for (int i = 0; i < m.dim; ++i) {
        const double v = s.x[i];
        if (!std::isfinite(v)) return false;
        scale = std::max(scale, std::abs(v));
        if (!m.periodic.empty() && m.periodic[i]) continue;
        if (v < m.domain.lo[i] - tol || v > m.domain.hi[i] + tol) return false;
    }
    for (const auto& c : m.constraints) {
        if (c.eval(s.x) > tol * scale) return false;
    }
    return true;
}

bool guard_active(const GuardComponent& g, std::span<const double> x, double event_tol) {
    if (std::abs(g.psi.eval(x)) >= event_tol) return false;
    for (const auto& q : g.ineqs) {
        if (q.eval(x) > event_tol) return false;
    }
    return true;
}

std::optional<int> guard_at(const HybridSystemDef& sys, const State& s, double event_tol) {
    const ModeSpec& m = sys.mode(s.mode);
    for (std::size_t k = 0; k < m.guards.size(); ++k) {
        if (guard_active(m.guards[k], s.x, event_tol)) return static_cast<int>(k);
    }
    return std::nullopt;
}

bool on_guard(const HybridSystemDef& sys, const State& s, double event_tol) {
    return guard_at(sys, s, event_tol).has_value();
}

double distance(const HybridSystemDef& sys, const State& a, const State& b) {
    if (a.mode != b.mode) return std::numeric_limits<double>::infinity();
    const ModeSpec& m = sys.mode(a.mode);
    double acc = 0.0;
    for (int i = 0; i < m.dim; ++i) {
        double d = std::abs(a.x[i] - b.x[i]);
        if (!m.periodic.empty() && m.periodic[i]) {
            const double w = m.domain.hi[i] - m.domain.lo[i];
            d = std::fmod(d, w);
            d = std::min(d, w - d);
        }
        acc += d * d;
    }
    return std::sqrt(acc);
}

void wrap_periodic(const ModeSpec& m, Vec& x) {
    if (m.periodic.empty()) return;
    for (int i = 0; i < m.dim; ++i) {
        if (!m.periodic[i]) continue;
        const double lo = m.domain.lo[i];
        const double w = m.domain.hi[i] - lo;
        double v = std::fmod(x[i] - lo, w);
        if (v < 0) v += w;
        if (v >= w) v = 0.0;
        x[i] = lo + v;
    }
}

void clamp_to_box(const ModeSpec& m, Vec& x) {
    for (int i = 0; i < m.dim; ++i) {
        if (!m.periodic.empty() && m.periodic[i]) continue;
        x[i] = std::clamp(x[i], m.domain.lo[i], m.domain.hi[i]);
    }
}

const char* to_string(DiagnosticKind kind) {
    switch (kind) {
        case DiagnosticKind::EmptyDomain: return "EmptyDomain";
        case DiagnosticKind::BadDimension: return "BadDimension";
        case DiagnosticKind::BadArity: return "BadArity";
        case DiagnosticKind::ModeIdsNotDense: return "ModeIdsNotDense";
        case DiagnosticKind::BadTarget: return "BadTarget";
        case DiagnosticKind::ResetOutOfDomain: return "ResetOutOfDomain";
        case DiagnosticKind::InwardGuard: return "InwardGuard";
        case DiagnosticKind::VanishingLieDerivatives: return "VanishingLieDerivatives";
    }
    return "Unknown";
}

namespace {

std::vector<Vec> lattice(const Box& b, int per_axis) {
    const int d = b.dim();
    std::vector<Vec> pts;
    std::vector<int> idx(d, 0);
    std::vector<int> n(d);
    for (int i = 0; i < d; ++i) n[i] = (b.hi[i] > b.lo[i]) ? per_axis : 1;
    while (true) {
        Vec p(d);
        for (int i = 0; i < d; ++i) {
            p[i] = n[i] == 1 ? b.lo[i] : b.lo[i] + (b.hi[i] - b.lo[i]) * idx[i] / (n[i] - 1);
        }
        pts.push_back(std::move(p));
        int k = 0;
        while (k < d && ++idx[k] == n[k]) idx[k++] = 0;
        if (k == d) break;
    }
    return pts;
}

bool arity_ok(const Polynomial& p, int dim) { return p.is_zero() || p.nvars() == dim; }

}  // namespace

std::vector<Vec> sample_guard(const ModeSpec& mode, int guard_idx, int per_axis, double event_tol) {
    const GuardComponent& g = mode.guards.at(guard_idx);
    std::vector<Polynomial> grad;
    for (int i = 0; i < mode.dim; ++i) grad.push_back(g.psi.partial(i));
    std::vector<Vec> out;
    std::set<std::vector<long long>> seen;
    for (Vec p : lattice(mode.domain, per_axis)) {
        if (!g.psi.is_zero()) {
            for (int it = 0; it < 40; ++it) {
                const double v = g.psi.eval(p);
                if (std::abs(v) < 1e-3 * event_tol) break;
                Vec gr(mode.dim);
                double n2 = 0.0;
                for (int i = 0; i < mode.dim; ++i) {
                    gr[i] = grad[i].eval(p);
                    n2 += gr[i] * gr[i];
                }
                if (n2 == 0.0) break;
                for (int i = 0; i < mode.dim; ++i) p[i] -= v * gr[i] / n2;
            }
        }
        bool ok = guard_active(g, p, event_tol);
        for (int i = 0; ok && i < mode.dim; ++i) {
            if (p[i] < mode.domain.lo[i] - 1e-12 || p[i] > mode.domain.hi[i] + 1e-12) ok = false;
        }
        for (const auto& c : mode.constraints) {
            if (ok && c.eval(p) > 1e-9) ok = false;
        }
        if (!ok) continue;
        std::vector<long long> key(mode.dim);
        for (int i = 0; i < mode.dim; ++i) key[i] = std::llround(p[i] * 1e9);
        if (seen.insert(key).second) out.push_back(std::move(p));
    }
    return out;
}

std::vector<Diagnostic> validate_system(const HybridSystemDef& sys) {
    std::vector<Diagnostic> diags;
    const int nmodes = static_cast<int>(sys.modes.size());
    for (int k = 0; k < nmodes; ++k) {
        if (sys.modes[k].id != k) {
            diags.push_back({DiagnosticKind::ModeIdsNotDense, k, -1, "mode ids must be 0..n-1 in order", {}});
        }
    }
    for (int k = 0; k < nmodes; ++k) {
        const ModeSpec& m = sys.modes[k];
        auto report = [&](DiagnosticKind kind, int g, std::string msg, std::optional<State> at = {}) {
            diags.push_back({kind, k, g, std::move(msg), std::move(at)});
        };
        if (m.dim < 1 || m.domain.dim() != m.dim || static_cast<int>(m.domain.hi.size()) != m.dim ||
            static_cast<int>(m.field.size()) != m.dim) {
            report(DiagnosticKind::BadDimension, -1, "dimension mismatch between dim, domain and field");
            continue;
        }
        for (int i = 0; i < m.dim; ++i) {
            if (!(m.domain.lo[i] <= m.domain.hi[i])) report(DiagnosticKind::EmptyDomain, -1, "empty domain interval");
        }
        bool arity = true;
        for (const auto& p : m.field) arity = arity && arity_ok(p, m.dim);
        for (const auto& p : m.constraints) arity = arity && arity_ok(p, m.dim);
        for (const auto& g : m.guards) {
            arity = arity && arity_ok(g.psi, m.dim);
            for (const auto& q : g.ineqs) arity = arity && arity_ok(q, m.dim);
            for (const auto& q : g.reset) arity = arity && arity_ok(q, m.dim);
        }
        if (!arity) {
            report(DiagnosticKind::BadArity, -1, "polynomial references coordinates outside the mode");
            continue;
        }
        for (int gi = 0; gi < static_cast<int>(m.guards.size()); ++gi) {
            const GuardComponent& g = m.guards[gi];
            if (g.target < 0 || g.target >= nmodes || static_cast<int>(g.reset.size()) != sys.modes[g.target].dim) {
                report(DiagnosticKind::BadTarget, gi, "reset target mode or reset arity invalid");
                continue;
            }
            const auto pts = sample_guard(m, gi);
            // Lie tower in double precision, enough to flag degenerate points.
            std::vector<Polynomial> tower;
            Polynomial cur = g.psi;
            for (int order = 1; order <= 6; ++order) {
                cur = lie_derivative(cur, m.field);
                tower.push_back(cur);
            }
            int n_out = 0, n_inward = 0, n_flat = 0;
            std::optional<State> w_out, w_inward, w_flat;
            for (const auto& p : pts) {
                State img{g.target, eval(g.reset, p)};
                wrap_periodic(sys.modes[g.target], img.x);
                if (!in_domain(sys, img, Tolerances{}.domain)) {
                    if (n_out++ == 0) w_out = State{k, p};
                }
                if (g.psi.is_zero()) continue;
                if (tower[0].eval(p) > Tolerances{}.event) {
                    if (n_inward++ == 0) w_inward = State{k, p};
                }
                bool all_zero = true;
                for (const auto& t : tower) all_zero = all_zero && std::abs(t.eval(p)) <= Tolerances{}.event;
                if (all_zero && n_flat++ == 0) w_flat = State{k, p};
            }
            auto where = [](const std::optional<State>& s) {
                std::ostringstream os;
                if (!s) return os.str();
                os << " (e.g. at";
                for (double v : s->x) os << ' ' << v;
                os << ')';
                return os.str();
            };
            if (n_out) {
                report(DiagnosticKind::ResetOutOfDomain, gi,
                       std::to_string(n_out) + " sampled guard points reset outside the target domain" + where(w_out),
                       w_out);
            }
            if (n_inward) {
                report(DiagnosticKind::InwardGuard, gi,
                       std::to_string(n_inward) + " sampled guard points with positive dpsi.X" + where(w_inward),
                       w_inward);
            }
            if (n_flat) {
                report(DiagnosticKind::VanishingLieDerivatives, gi,
                       "guard point with all sampled Lie derivatives 0" + where(w_flat), w_flat);
            }
        }
    }
    return diags;
}

}  // namespace hcd
