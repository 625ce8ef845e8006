#pragma once

#include <string>
#include <vector>

#include "hcd/system.hpp"

namespace hcd {

enum class BuiltinId { BouncingBall, SpringBall, Counterexample, OmegaPathology, CircleRotation, GradientFlow };

struct BuiltinParams {
    double g = 1.0;
    double d = 0.8;
    double E0 = 5.0;
    double alpha = 0.377;  // rotation number for the circle map
};

// Accepts the CLI ids: ball, spring, counterexample, omega, rotation, gradientflow.
BuiltinId parse_builtin(const std::string& id);
const char* to_string(BuiltinId id);
std::vector<std::string> builtin_names();

HybridSystemDef instantiate(BuiltinId id, const BuiltinParams& p = {});

namespace oracle {

// Ball: time to reach x = 0 from (x, y).
double ball_mu(double x, double y, double g);
// Impact speed sqrt(y^2 + 2 g x).
double ball_impact_speed(double x, double y, double g);
// Exact Zeno time: first flight plus the geometric sum of later flights.
double ball_stop_time(double x, double y, double g, double d);
// The series with the first flight taken as a full bounce 2v/g.
double ball_stop_time_series(double x, double y, double g, double d);
// First n impact times of the ball from (x, y).
std::vector<double> ball_jump_times(double x, double y, double g, double d, int n);
double ball_energy(double x, double y, double g);

// Spring: time to reach x = 0, using the polar angle theta = atan2(y, x).
double spring_mu(double x, double y);

// Candidate complete Lyapunov functions with their stock constants.
double ball_lyapunov(double x, double y, double a, double b, double g);
double ball_default_b();
double ball_default_a(double g, double d, double b);
double ball_reset_margin(double y, double a, double b, double g, double d);

double spring_lyapunov(double x, double y, double a, double b);
double spring_default_a(double d, double b);
double spring_reset_margin(double rho, double a, double b, double d);

}  // namespace oracle

}  // namespace hcd
