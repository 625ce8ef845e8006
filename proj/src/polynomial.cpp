#include "hcd/polynomial.hpp"

#include <algorithm>
#include <cmath>

#include "hcd/error.hpp"

namespace hcd {

namespace {

double ipow(double base, int e) {
    double r = 1.0;
    while (e > 0) {
        if (e & 1) r *= base;
        base *= base;
        e >>= 1;
    }
    return r;
}

}  // namespace

Polynomial Polynomial::constant(int nvars, double c) {
    Polynomial p(nvars);
    p.add_term(c, std::vector<int>(nvars, 0));
    return p;
}

Polynomial Polynomial::variable(int nvars, int index, double c) {
    Polynomial p(nvars);
    std::vector<int> e(nvars, 0);
    e.at(index) = 1;
    p.add_term(c, std::move(e));
    return p;
}

Polynomial Polynomial::monomial(double c, std::vector<int> exps) {
    Polynomial p(static_cast<int>(exps.size()));
    p.add_term(c, std::move(exps));
    return p;
}

void Polynomial::add_term(double c, std::vector<int> exps) {
    if (static_cast<int>(exps.size()) != nvars_) {
        throw Error(ErrorKind::BadParameter, "monomial arity does not match polynomial");
    }
    for (int e : exps) {
        if (e < 0) throw Error(ErrorKind::BadParameter, "negative exponent");
    }
    auto it = std::lower_bound(terms_.begin(), terms_.end(), exps,
                               [](const Monomial& m, const std::vector<int>& k) { return m.exps < k; });
    if (it != terms_.end() && it->exps == exps) {
        it->coeff += c;
        if (it->coeff == 0.0) terms_.erase(it);
    } else if (c != 0.0) {
        terms_.insert(it, Monomial{c, std::move(exps)});
    }
}

int Polynomial::degree() const {
    int d = 0;
    for (const auto& m : terms_) {
        int s = 0;
        for (int e : m.exps) s += e;
        d = std::max(d, s);
    }
    return d;
}

double Polynomial::eval(std::span<const double> x) const {
    double acc = 0.0;
    for (const auto& m : terms_) {
        double v = m.coeff;
        for (int i = 0; i < nvars_; ++i) {
            if (m.exps[i] != 0) v *= ipow(x[i], m.exps[i]);
        }
        acc += v;
    }
    return acc;
}

Polynomial Polynomial::partial(int index) const {
    Polynomial p(nvars_);
    for (const auto& m : terms_) {
        int e = m.exps.at(index);
        if (e == 0) continue;
        auto ex = m.exps;
        ex[index] = e - 1;
        p.add_term(m.coeff * e, std::move(ex));
    }
    return p;
}

Polynomial Polynomial::operator+(const Polynomial& o) const {
    Polynomial p = *this;
    if (p.nvars_ == 0) p.nvars_ = o.nvars_;
    for (const auto& m : o.terms_) p.add_term(m.coeff, m.exps);
    return p;
}

Polynomial Polynomial::operator-(const Polynomial& o) const { return *this + o * -1.0; }

Polynomial Polynomial::operator*(const Polynomial& o) const {
    Polynomial p(std::max(nvars_, o.nvars_));
    for (const auto& a : terms_) {
        for (const auto& b : o.terms_) {
            std::vector<int> e(a.exps.size());
            for (std::size_t i = 0; i < e.size(); ++i) e[i] = a.exps[i] + b.exps[i];
            p.add_term(a.coeff * b.coeff, std::move(e));
        }
    }
    return p;
}

Polynomial Polynomial::operator*(double s) const {
    Polynomial p(nvars_);
    if (s == 0.0) return p;
    p.terms_ = terms_;
    for (auto& m : p.terms_) m.coeff *= s;
    return p;
}

bool Polynomial::operator==(const Polynomial& o) const {
    if (terms_.size() != o.terms_.size()) return false;
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        if (terms_[i].coeff != o.terms_[i].coeff || terms_[i].exps != o.terms_[i].exps) return false;
    }
    return true;
}

Vec eval(const PolyMap& map, std::span<const double> x) {
    Vec out(map.size());
    eval_into(map, x, out);
    return out;
}

void eval_into(const PolyMap& map, std::span<const double> x, std::span<double> out) {
    for (std::size_t k = 0; k < map.size(); ++k) out[k] = map[k].eval(x);
}

Polynomial lie_derivative(const Polynomial& psi, const PolyMap& field) {
    Polynomial acc(psi.nvars());
    for (int i = 0; i < psi.nvars(); ++i) {
        Polynomial d = psi.partial(i);
        if (d.is_zero()) continue;
        acc = acc + d * field.at(i);
    }
    return acc;
}

double lie_derivative_at(const Polynomial& psi, const PolyMap& field, std::span<const double> x) {
    double acc = 0.0;
    for (int i = 0; i < psi.nvars(); ++i) {
        Polynomial d = psi.partial(i);
        if (d.is_zero()) continue;
        acc += d.eval(x) * field.at(i).eval(x);
    }
    return acc;
}

}  // namespace hcd
