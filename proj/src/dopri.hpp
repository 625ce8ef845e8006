#pragma once

// Dormand-Prince 5(4) stepper with FSAL and the standard 4th-order dense output.

#include <algorithm>
#include <cmath>

#include "hcd/polynomial.hpp"

namespace hcd::detail {

class Dopri {
public:
    explicit Dopri(const PolyMap& f, double sign = 1.0)
        : f_(f), n_(f.size()), sign_(sign), k_(7, Vec(n_)), y1_(n_), tmp_(n_), r_(5, Vec(n_)) {}

    void rhs(const Vec& y, Vec& out) const {
        eval_into(f_, y, out);
        if (sign_ != 1.0) {
            for (auto& v : out) v *= sign_;
        }
    }

    // One step of size h from y0 where f0 = f(y0). Returns the normalized
    // error estimate (<= 1 means acceptable at tolerance tol).
    double step(const Vec& y0, const Vec& f0, double h, double tol) {
        static constexpr double a21 = 1.0 / 5.0;
        static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
        static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
        static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                                a54 = -212.0 / 729.0;
        static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                                a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
        static constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                                a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
        static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                                e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
        static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                                d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                                d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
        auto& k1 = k_[0];
        auto& k2 = k_[1];
        auto& k3 = k_[2];
        auto& k4 = k_[3];
        auto& k5 = k_[4];
        auto& k6 = k_[5];
        auto& k7 = k_[6];
        k1 = f0;
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y0[i] + h * a21 * k1[i];
        rhs(tmp_, k2);
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y0[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(tmp_, k3);
        for (std::size_t i = 0; i < n_; ++i) tmp_[i] = y0[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(tmp_, k4);
        for (std::size_t i = 0; i < n_; ++i)
            tmp_[i] = y0[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(tmp_, k5);
        for (std::size_t i = 0; i < n_; ++i)
            tmp_[i] = y0[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        rhs(tmp_, k6);
        for (std::size_t i = 0; i < n_; ++i)
            y1_[i] = y0[i] + h * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] + a76 * k6[i]);
        rhs(y1_, k7);
        double acc = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            const double err = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double sk = tol + tol * std::max(std::abs(y0[i]), std::abs(y1_[i]));
            acc += (err / sk) * (err / sk);
        }
        for (std::size_t i = 0; i < n_; ++i) {
            r_[0][i] = y0[i];
            r_[1][i] = y1_[i] - y0[i];
            r_[2][i] = h * k1[i] - r_[1][i];
            r_[3][i] = r_[1][i] - h * k7[i] - r_[2][i];
            r_[4][i] = h * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }
        return n_ ? std::sqrt(acc / static_cast<double>(n_)) : 0.0;
    }

    const Vec& y1() const { return y1_; }
    const Vec& f1() const { return k_[6]; }

    Vec dense(double theta) const {
        Vec out(n_);
        const double t1 = 1.0 - theta;
        for (std::size_t i = 0; i < n_; ++i) {
            out[i] = r_[0][i] + theta * (r_[1][i] + t1 * (r_[2][i] + theta * (r_[3][i] + t1 * r_[4][i])));
        }
        return out;
    }

    // Fresh single step of size h from y0, without touching the dense state.
    Vec single(const Vec& y0, double h) const {
        Dopri tmp(f_, sign_);
        Vec f0(n_);
        tmp.rhs(y0, f0);
        tmp.step(y0, f0, h, 1.0);
        return tmp.y1_;
    }

private:
    const PolyMap& f_;
    std::size_t n_;
    double sign_;
    std::vector<Vec> k_;
    Vec y1_, tmp_;
    std::vector<Vec> r_;
};

}  // namespace hcd::detail
