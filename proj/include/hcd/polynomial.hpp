#pragma once

#include <span>
#include <vector>

namespace hcd {

using Vec = std::vector<double>;

struct Monomial {
    double coeff = 0.0;
    std::vector<int> exps;  // one exponent per variable
};

// Sparse multivariate polynomial with double coefficients. Terms are kept
// sorted by exponent vector with like terms merged and zeros dropped.
class Polynomial {
public:
    Polynomial() = default;
    explicit Polynomial(int nvars) : nvars_(nvars) {}

    static Polynomial constant(int nvars, double c);
    static Polynomial variable(int nvars, int index, double c = 1.0);
    static Polynomial monomial(double c, std::vector<int> exps);

    void add_term(double c, std::vector<int> exps);

    int nvars() const { return nvars_; }
    const std::vector<Monomial>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    int degree() const;

    double eval(std::span<const double> x) const;
    Polynomial partial(int index) const;

    Polynomial operator+(const Polynomial& o) const;
    Polynomial operator-(const Polynomial& o) const;
    Polynomial operator*(const Polynomial& o) const;
    Polynomial operator*(double s) const;
    Polynomial operator-() const { return *this * -1.0; }

    bool operator==(const Polynomial& o) const;

private:
    int nvars_ = 0;
    std::vector<Monomial> terms_;
};

// A polynomial map R^n -> R^m, one component per output.
using PolyMap = std::vector<Polynomial>;

Vec eval(const PolyMap& map, std::span<const double> x);
void eval_into(const PolyMap& map, std::span<const double> x, std::span<double> out);

// dpsi . X
Polynomial lie_derivative(const Polynomial& psi, const PolyMap& field);
double lie_derivative_at(const Polynomial& psi, const PolyMap& field, std::span<const double> x);

}  // namespace hcd
