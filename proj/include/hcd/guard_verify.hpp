#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "hcd/system.hpp"

namespace hcd {

using Rational = boost::multiprecision::cpp_rational;

// Polynomial with exact rational coefficients, keyed by exponent vector.
class RationalPolynomial {
public:
    RationalPolynomial() = default;
    explicit RationalPolynomial(int nvars) : nvars_(nvars) {}
    // Exact conversion: every finite double is a dyadic rational.
    static RationalPolynomial from(const Polynomial& p);

    int nvars() const { return nvars_; }
    const std::map<std::vector<int>, Rational>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    int degree() const;

    void add_term(const Rational& c, const std::vector<int>& exps);
    RationalPolynomial partial(int index) const;
    RationalPolynomial operator+(const RationalPolynomial& o) const;
    RationalPolynomial operator*(const RationalPolynomial& o) const;
    RationalPolynomial operator*(const Rational& s) const;
    bool operator==(const RationalPolynomial& o) const { return nvars_ == o.nvars_ && terms_ == o.terms_; }

    double eval(const Vec& x) const;
    Polynomial to_double() const;
    std::string str() const;

private:
    int nvars_ = 0;
    std::map<std::vector<int>, Rational> terms_;
};

struct LieTower {
    std::vector<RationalPolynomial> derivatives;  // L^1 psi .. L^m psi
};

// Throws DegreeOverflow when a derivative exceeds degree_cap.
LieTower lie_tower(const PolyMap& field, const Polynomial& psi, int m_max, int degree_cap = 64);

enum class CriterionOutcome { NotTangent, Pass, Fail, Inconclusive };
const char* to_string(CriterionOutcome o);

struct CriterionPoint {
    Vec x;
    CriterionOutcome outcome = CriterionOutcome::NotTangent;
    int order = 0;        // first order with a nonzero value (0 if none)
    double value = 0.0;   // that value, or L^1 for non-tangent points
};

std::vector<CriterionPoint> check_lie_criterion(const HybridSystemDef& sys, int mode, int guard_idx, int m_max,
                                                const std::vector<Vec>& guard_samples,
                                                double event_tol = Tolerances{}.event);

struct MuViolation {
    State p, q;
    double mu_p = 0.0, mu_q = 0.0;
};

struct MuContinuityOptions {
    double radius = 0.2;
    int n_pairs = 2000;
    double delta = 1e-3;
    double gap = 1.0;
    double horizon = 50.0;
    std::uint64_t seed = 1;
    int max_reported = 10;
};

std::vector<MuViolation> check_mu_continuity(const HybridSystemDef& sys, const MuContinuityOptions& opt = {});

struct BoundaryViolation {
    State where;
    std::string what;
    double value = 0.0;
};

// Guard samples need dpsi.X <= 0; domain faces and constraint boundaries
// away from the guard need the field to point non-strictly inward.
std::vector<BoundaryViolation> check_exit_boundary(const HybridSystemDef& sys, int per_axis = 21,
                                                   double tol = 1e-9);

enum class GuardVerdict { LikelyTrapping, ViolationFound, Inconclusive };
const char* to_string(GuardVerdict v);
int exit_code(GuardVerdict v);

struct GuardReport {
    struct GuardEntry {
        int mode = 0;
        int guard = 0;
        std::vector<std::string> tower;  // printed L^k psi
        std::vector<CriterionPoint> points;
    };
    std::vector<GuardEntry> guards;
    std::vector<MuViolation> mu_violations;
    std::vector<BoundaryViolation> boundary_violations;
    GuardVerdict verdict = GuardVerdict::LikelyTrapping;
    std::string summary;
};

struct GuardVerifyOptions {
    int m_max = 8;
    MuContinuityOptions mu;
};

GuardReport verify_guard(const HybridSystemDef& sys, const GuardVerifyOptions& opt = {});

}  // namespace hcd
