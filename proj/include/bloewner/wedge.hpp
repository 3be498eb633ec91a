#pragma once

#include <complex>
#include <utility>

namespace bloewner {

/// Conformal data for the two straight slits meeting the axis at angles
/// theta1 < theta2 from the positive real axis, with a = theta1/pi,
/// b = 1 - theta2/pi.
struct WedgeSpec {
    double theta1 = 0.0;
    double theta2 = 0.0;
    double a = 0.0;
    double b = 0.0;
    double x = 0.0;  // negative root of the cubic Q
    double psi1 = 0.0;
    double psi2 = 0.0;
    /// psi1 -/+ psi2: drivers zeta_j sqrt(t) for unit-mass atoms
    /// (d/dt g = sum 1/(g - V_j)). Traced hulls reproduce the requested angles
    /// exactly when theta1 + theta2 = pi.
    double zeta1 = 0.0;
    double zeta2 = 0.0;
    /// The same constants divided by sqrt(2); this scaling matches
    /// balanced_constants and is reported alongside for comparison.
    double zeta1_scaled = 0.0;
    double zeta2_scaled = 0.0;
};

/// The cubic whose negative root parametrizes the wedge.
double wedge_cubic(double a, double b, double x);

/// Unique negative root of the cubic, by bracketed bisection.
double negative_root(double a, double b);

WedgeSpec wedge_constants(double theta1, double theta2);

/// (-c, c) with c = sqrt((pi - 2 theta) / theta); drivers are (-c sqrt t, c sqrt t).
std::pair<double, double> balanced_constants(double theta);

/// f(z) = (z-1)^a z^(1-a-b) (z-x)^b with principal branches, arg in [0, pi]
/// on the closed upper half-plane.
std::complex<double> folding_map(double a, double b, double x, std::complex<double> z);

/// theta = pi / (alpha + 2).
double angle_from_alpha(double alpha);
/// alpha = pi / theta - 2.
double alpha_from_angle(double theta);

}  // namespace bloewner
