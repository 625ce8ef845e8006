#include "hcd/guard_verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "hcd/error.hpp"
#include "hcd/simulate.hpp"

namespace hcd {

RationalPolynomial RationalPolynomial::from(const Polynomial& p) {
    RationalPolynomial r(p.nvars());
    for (const auto& m : p.terms()) r.add_term(Rational(m.coeff), m.exps);
    return r;
}

int RationalPolynomial::degree() const {
    int d = 0;
    for (const auto& [e, c] : terms_) {
        int s = 0;
        for (int v : e) s += v;
        d = std::max(d, s);
    }
    return d;
}

void RationalPolynomial::add_term(const Rational& c, const std::vector<int>& exps) {
    if (static_cast<int>(exps.size()) != nvars_) throw Error(ErrorKind::BadParameter, "monomial arity mismatch");
    if (c == 0) return;
    auto [it, inserted] = terms_.try_emplace(exps, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) terms_.erase(it);
    }
}

RationalPolynomial RationalPolynomial::partial(int index) const {
    RationalPolynomial r(nvars_);
    for (const auto& [e, c] : terms_) {
        if (e[index] == 0) continue;
        auto ex = e;
        ex[index] -= 1;
        r.add_term(c * e[index], ex);
    }
    return r;
}

RationalPolynomial RationalPolynomial::operator+(const RationalPolynomial& o) const {
    RationalPolynomial r = *this;
    if (r.nvars_ == 0) r.nvars_ = o.nvars_;
    for (const auto& [e, c] : o.terms_) r.add_term(c, e);
    return r;
}

RationalPolynomial RationalPolynomial::operator*(const RationalPolynomial& o) const {
    RationalPolynomial r(std::max(nvars_, o.nvars_));
    for (const auto& [ea, ca] : terms_) {
        for (const auto& [eb, cb] : o.terms_) {
            std::vector<int> e(ea.size());
            for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
            r.add_term(ca * cb, e);
        }
    }
    return r;
}

RationalPolynomial RationalPolynomial::operator*(const Rational& s) const {
    RationalPolynomial r(nvars_);
    if (s == 0) return r;
    for (const auto& [e, c] : terms_) r.terms_.emplace(e, c * s);
    return r;
}

Polynomial RationalPolynomial::to_double() const {
    Polynomial p(nvars_);
    for (const auto& [e, c] : terms_) p.add_term(static_cast<double>(c), e);
    return p;
}

double RationalPolynomial::eval(const Vec& x) const { return to_double().eval(x); }

std::string RationalPolynomial::str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto it = terms_.rbegin(); it != terms_.rend(); ++it) {
        const auto& [e, c] = *it;
        Rational mag = c < 0 ? Rational(-c) : c;
        os << (first ? (c < 0 ? "-" : "") : (c < 0 ? " - " : " + "));
        first = false;
        bool constant = std::all_of(e.begin(), e.end(), [](int v) { return v == 0; });
        if (mag != 1 || constant) os << mag;
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0) continue;
            os << "x" << i;
            if (e[i] > 1) os << "^" << e[i];
        }
    }
    return os.str();
}

LieTower lie_tower(const PolyMap& field, const Polynomial& psi, int m_max, int degree_cap) {
    if (m_max < 1) throw Error(ErrorKind::BadParameter, "m_max must be at least 1");
    std::vector<RationalPolynomial> X;
    for (const auto& f : field) X.push_back(RationalPolynomial::from(f));
    LieTower tower;
    RationalPolynomial cur = RationalPolynomial::from(psi);
    const int n = static_cast<int>(field.size());
    for (int m = 1; m <= m_max; ++m) {
        RationalPolynomial next(n);
        if (cur.nvars() == n) {
            for (int i = 0; i < n; ++i) {
                RationalPolynomial d = cur.partial(i);
                if (!d.is_zero()) next = next + d * X[i];
            }
        }
        if (next.degree() > degree_cap) {
            throw Error(ErrorKind::DegreeOverflow,
                        "Lie derivative of order " + std::to_string(m) + " exceeds degree " + std::to_string(degree_cap));
        }
        tower.derivatives.push_back(next);
        cur = std::move(next);
    }
    return tower;
}

const char* to_string(CriterionOutcome o) {
    switch (o) {
        case CriterionOutcome::NotTangent: return "NotTangent";
        case CriterionOutcome::Pass: return "Pass";
        case CriterionOutcome::Fail: return "Fail";
        case CriterionOutcome::Inconclusive: return "Inconclusive";
    }
    return "Unknown";
}

std::vector<CriterionPoint> check_lie_criterion(const HybridSystemDef& sys, int mode, int guard_idx, int m_max,
                                                const std::vector<Vec>& guard_samples, double event_tol) {
    const ModeSpec& m = sys.mode(mode);
    const LieTower tower = lie_tower(m.field, m.guards.at(guard_idx).psi, m_max);
    std::vector<Polynomial> num;
    for (const auto& d : tower.derivatives) num.push_back(d.to_double());
    std::vector<CriterionPoint> out;
    for (const Vec& x : guard_samples) {
        CriterionPoint cp;
        cp.x = x;
        const double l1 = num[0].eval(x);
        if (std::abs(l1) > event_tol) {
            cp.outcome = CriterionOutcome::NotTangent;
            cp.order = 1;
            cp.value = l1;
            out.push_back(std::move(cp));
            continue;
        }
        cp.outcome = CriterionOutcome::Inconclusive;
        for (int k = 2; k <= m_max; ++k) {
            const double v = num[k - 1].eval(x);
            if (std::abs(v) > event_tol) {
                cp.order = k;
                cp.value = v;
                cp.outcome = v < 0 ? CriterionOutcome::Pass : CriterionOutcome::Fail;
                break;
            }
        }
        out.push_back(std::move(cp));
    }
    return out;
}

std::vector<MuViolation> check_mu_continuity(const HybridSystemDef& sys, const MuContinuityOptions& opt) {
    std::vector<State> guard;
    for (int m = 0; m < static_cast<int>(sys.modes.size()); ++m) {
        for (int gi = 0; gi < static_cast<int>(sys.modes[m].guards.size()); ++gi) {
            for (Vec& p : sample_guard(sys.modes[m], gi)) guard.push_back(State{m, std::move(p)});
        }
    }
    std::vector<MuViolation> out;
    if (guard.empty()) return out;
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, guard.size() - 1);
    auto direction = [&](int dim) {
        Vec v(dim);
        double n2 = 0;
        while (n2 == 0) {
            n2 = 0;
            for (auto& c : v) {
                c = normal(rng);
                n2 += c * c;
            }
        }
        for (auto& c : v) c /= std::sqrt(n2);
        return v;
    };
    auto mu = [&](const State& s) {
        const FlowTime f = max_flow_time(sys, s, opt.horizon);
        return f.finite ? f.mu : opt.horizon;
    };
    for (int i = 0; i < opt.n_pairs && static_cast<int>(out.size()) < opt.max_reported; ++i) {
        State p = guard[pick(rng)];
        const int dim = static_cast<int>(p.x.size());
        if (unit(rng) >= 0.25) {
            // Log-uniform radius so that tiny neighborhoods of the guard get sampled.
            const double r = opt.radius * std::pow(10.0, -6.0 * unit(rng));
            const Vec dir = direction(dim);
            for (int d = 0; d < dim; ++d) p.x[d] += r * dir[d];
        }
        State q = p;
        const Vec dir = direction(dim);
        const double r = opt.delta * unit(rng);
        for (int d = 0; d < dim; ++d) q.x[d] += r * dir[d];
        if (!in_domain(sys, p, 0.0) || !in_domain(sys, q, 0.0)) continue;
        try {
            const double a = mu(p), b = mu(q);
            if (std::abs(a - b) > opt.gap) out.push_back({p, q, a, b});
        } catch (const Error&) {
            continue;
        }
    }
    return out;
}

namespace {

std::vector<Vec> face_lattice(const Box& b, int axis, double value, int per_axis) {
    const int d = b.dim();
    std::vector<Vec> pts{Vec{}};
    for (int i = 0; i < d; ++i) {
        std::vector<Vec> next;
        for (const Vec& p : pts) {
            if (i == axis) {
                Vec q = p;
                q.push_back(value);
                next.push_back(std::move(q));
                continue;
            }
            const int n = b.hi[i] > b.lo[i] ? per_axis : 1;
            for (int k = 0; k < n; ++k) {
                Vec q = p;
                q.push_back(n == 1 ? b.lo[i] : b.lo[i] + (b.hi[i] - b.lo[i]) * k / (n - 1));
                next.push_back(std::move(q));
            }
        }
        pts = std::move(next);
    }
    return pts;
}

}  // namespace

std::vector<BoundaryViolation> check_exit_boundary(const HybridSystemDef& sys, int per_axis, double tol) {
    std::vector<BoundaryViolation> out;
    for (int mi = 0; mi < static_cast<int>(sys.modes.size()); ++mi) {
        const ModeSpec& m = sys.modes[mi];
        for (int gi = 0; gi < static_cast<int>(m.guards.size()); ++gi) {
            const auto& g = m.guards[gi];
            if (g.psi.is_zero()) continue;
            for (const Vec& z : sample_guard(m, gi, per_axis)) {
                const double v = lie_derivative_at(g.psi, m.field, z);
                if (v > tol) out.push_back({State{mi, z}, "guard " + std::to_string(gi) + ": dpsi.X > 0", v});
            }
        }
        auto check = [&](const Vec& x, const Vec& normal, const std::string& what) {
            const State s{mi, x};
            if (!in_domain(sys, s) || on_guard(sys, s)) return;
            const Vec f = eval(m.field, x);
            double dot = 0.0, nn = 0.0;
            for (int i = 0; i < m.dim; ++i) {
                dot += f[i] * normal[i];
                nn += normal[i] * normal[i];
            }
            if (nn == 0.0) return;
            dot /= std::sqrt(nn);
            if (dot > tol) out.push_back({s, what + ": field points outward", dot});
        };
        for (int axis = 0; axis < m.dim; ++axis) {
            if (!m.periodic.empty() && m.periodic[axis]) continue;
            if (m.domain.hi[axis] == m.domain.lo[axis]) continue;
            for (int side = 0; side < 2; ++side) {
                const double v = side ? m.domain.hi[axis] : m.domain.lo[axis];
                Vec normal(m.dim, 0.0);
                normal[axis] = side ? 1.0 : -1.0;
                for (const Vec& x : face_lattice(m.domain, axis, v, per_axis)) {
                    check(x, normal, "face x" + std::to_string(axis) + (side ? "=hi" : "=lo"));
                }
            }
        }
        for (std::size_t ci = 0; ci < m.constraints.size(); ++ci) {
            const Polynomial& c = m.constraints[ci];
            std::vector<Polynomial> grad;
            for (int i = 0; i < m.dim; ++i) grad.push_back(c.partial(i));
            std::vector<Vec> pts{Vec{}};
            for (int i = 0; i < m.dim; ++i) {
                std::vector<Vec> next;
                for (const Vec& p : pts) {
                    for (int k = 0; k < per_axis; ++k) {
                        Vec q = p;
                        q.push_back(m.domain.lo[i] + (m.domain.hi[i] - m.domain.lo[i]) * k / (per_axis - 1));
                        next.push_back(std::move(q));
                    }
                }
                pts = std::move(next);
            }
            for (Vec p : pts) {
                Vec gr(m.dim);
                for (int it = 0; it < 40; ++it) {
                    const double v = c.eval(p);
                    double n2 = 0.0;
                    for (int i = 0; i < m.dim; ++i) {
                        gr[i] = grad[i].eval(p);
                        n2 += gr[i] * gr[i];
                    }
                    if (std::abs(v) < 1e-13 || n2 == 0.0) break;
                    for (int i = 0; i < m.dim; ++i) p[i] -= v * gr[i] / n2;
                }
                if (std::abs(c.eval(p)) > 1e-9) continue;
                bool inside = true;
                for (int i = 0; i < m.dim; ++i) {
                    inside = inside && p[i] >= m.domain.lo[i] - 1e-12 && p[i] <= m.domain.hi[i] + 1e-12;
                }
                if (!inside) continue;
                for (int i = 0; i < m.dim; ++i) gr[i] = grad[i].eval(p);
                check(p, gr, "constraint " + std::to_string(ci));
            }
        }
    }
    return out;
}

const char* to_string(GuardVerdict v) {
    switch (v) {
        case GuardVerdict::LikelyTrapping: return "LikelyTrapping";
        case GuardVerdict::ViolationFound: return "ViolationFound";
        case GuardVerdict::Inconclusive: return "Inconclusive";
    }
    return "Unknown";
}

int exit_code(GuardVerdict v) {
    switch (v) {
        case GuardVerdict::LikelyTrapping: return 0;
        case GuardVerdict::ViolationFound: return 2;
        case GuardVerdict::Inconclusive: return 3;
    }
    return 1;
}

GuardReport verify_guard(const HybridSystemDef& sys, const GuardVerifyOptions& opt) {
    GuardReport rep;
    bool fail = false, inconclusive = false;
    for (int mi = 0; mi < static_cast<int>(sys.modes.size()); ++mi) {
        const ModeSpec& m = sys.modes[mi];
        for (int gi = 0; gi < static_cast<int>(m.guards.size()); ++gi) {
            GuardReport::GuardEntry e;
            e.mode = mi;
            e.guard = gi;
            if (m.guards[gi].psi.is_zero()) {
                rep.guards.push_back(std::move(e));
                continue;
            }
            for (const auto& d : lie_tower(m.field, m.guards[gi].psi, opt.m_max).derivatives) e.tower.push_back(d.str());
            e.points = check_lie_criterion(sys, mi, gi, opt.m_max, sample_guard(m, gi));
            for (const auto& p : e.points) {
                fail = fail || p.outcome == CriterionOutcome::Fail;
                inconclusive = inconclusive || p.outcome == CriterionOutcome::Inconclusive;
            }
            rep.guards.push_back(std::move(e));
        }
    }
    rep.mu_violations = check_mu_continuity(sys, opt.mu);
    rep.boundary_violations = check_exit_boundary(sys);
    std::ostringstream os;
    if (fail || !rep.mu_violations.empty() || !rep.boundary_violations.empty()) {
        rep.verdict = GuardVerdict::ViolationFound;
        os << "violation:";
        if (fail) os << " Lie criterion sign";
        if (!rep.mu_violations.empty()) os << " mu discontinuity";
        if (!rep.boundary_violations.empty()) os << " exit boundary";
    } else if (inconclusive) {
        rep.verdict = GuardVerdict::Inconclusive;
        os << "all sampled Lie derivatives vanish at some guard point";
    } else {
        rep.verdict = GuardVerdict::LikelyTrapping;
        os << "Lie criterion, mu continuity and exit boundary checks pass";
    }
    rep.summary = os.str();
    return rep;
}

}  // namespace hcd
