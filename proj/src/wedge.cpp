#include "bloewner/wedge.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bloewner/errors.hpp"

namespace bloewner {

namespace {

void check_ab(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || !(a + b < 1.0)) {
        throw InvalidArgument("wedge parameters need a > 0, b > 0, a + b < 1 (got a=" + std::to_string(a) +
                              ", b=" + std::to_string(b) + ")");
    }
}

// Sum of absolute values of the monomials, used as the residual scale.
double cubic_scale(double a, double b, double x) {
    const double ax = std::abs(x);
    return a + a * a * a + 3 * a * ax + 3 * a * a * ax + 3 * a * b * ax + 3 * a * a * b * ax + 3 * b * ax * ax +
           3 * a * b * ax * ax + 3 * b * b * ax * ax + 3 * a * b * b * ax * ax + b * ax * ax * ax +
           b * b * b * ax * ax * ax;
}

std::complex<double> principal_pow(std::complex<double> w, double p) {
    if (w == std::complex<double>(0.0, 0.0)) return p > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    // Closed upper half-plane convention: the negative real axis has arg = pi.
    double im = w.imag();
    if (im == 0.0) im = 0.0;  // drop the sign of -0.0
    const double arg = std::atan2(im, w.real());
    const double mod = std::abs(w);
    return std::polar(std::pow(mod, p), p * arg);
}

}  // namespace

double wedge_cubic(double a, double b, double x) {
    return -a + a * a * a + 3 * a * x - 3 * a * a * x - 3 * a * b * x + 3 * a * a * b * x + 3 * b * x * x -
           3 * a * b * x * x - 3 * b * b * x * x + 3 * a * b * b * x * x - b * x * x * x + b * b * b * x * x * x;
}

double negative_root(double a, double b) {
    check_ab(a, b);
    // Q(0) = -a(1-a^2) < 0 and Q -> +inf as x -> -inf.
    double lo = -1.0;
    while (wedge_cubic(a, b, lo) <= 0.0) {
        lo *= 2.0;
        if (lo < -1e300) throw NumericalFailure("negative_root: bracket search diverged");
    }
    double hi = 0.0;
    for (int it = 0; it < 400; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double q = wedge_cubic(a, b, mid);
        if (q == 0.0) return mid;
        (q > 0.0 ? lo : hi) = mid;
    }
    const double x = 0.5 * (lo + hi);
    if (std::abs(wedge_cubic(a, b, x)) > 1e-14 * cubic_scale(a, b, x)) {
        throw NumericalFailure("negative_root: residual above tolerance");
    }
    return x;
}

WedgeSpec wedge_constants(double theta1, double theta2) {
    if (!(theta1 > 0.0) || !(theta2 > theta1) || !(theta2 < std::numbers::pi)) {
        throw InvalidArgument("wedge angles need 0 < theta1 < theta2 < pi");
    }
    WedgeSpec w;
    w.theta1 = theta1;
    w.theta2 = theta2;
    w.a = theta1 / std::numbers::pi;
    w.b = 1.0 - theta2 / std::numbers::pi;
    w.x = negative_root(w.a, w.b);
    const double a = w.a;
    const double b = w.b;
    const double x = w.x;
    const double den = std::sqrt(a * (1 - a) - 2 * a * b * x + b * (1 - b) * x * x);
    w.psi1 = (1 + x - 3 * a - 3 * b * x) / den;
    w.psi2 = std::sqrt((1 - a) * (1 - a) + 2 * x * (a + b + a * b - 1) + x * x * (1 - b) * (1 - b)) / den;
    w.zeta1 = w.psi1 - w.psi2;
    w.zeta2 = w.psi1 + w.psi2;
    w.zeta1_scaled = w.zeta1 / std::numbers::sqrt2;
    w.zeta2_scaled = w.zeta2 / std::numbers::sqrt2;
    return w;
}

std::pair<double, double> balanced_constants(double theta) {
    if (!(theta > 0.0) || !(theta < std::numbers::pi / 2)) {
        throw InvalidArgument("balanced_constants needs 0 < theta < pi/2");
    }
    const double c = std::sqrt((std::numbers::pi - 2.0 * theta) / theta);
    return {-c, c};
}

std::complex<double> folding_map(double a, double b, double x, std::complex<double> z) {
    check_ab(a, b);
    if (!(x < 0.0)) throw InvalidArgument("folding_map needs x < 0");
    if (z.imag() < 0.0) throw InvalidArgument("folding_map is defined on the closed upper half-plane");
    return principal_pow(z - 1.0, a) * principal_pow(z, 1.0 - a - b) * principal_pow(z - x, b);
}

double angle_from_alpha(double alpha) {
    if (!(alpha > 0.0)) throw InvalidArgument("alpha must be positive");
    return std::numbers::pi / (alpha + 2.0);
}

double alpha_from_angle(double theta) {
    if (!(theta > 0.0 && theta < std::numbers::pi / 2)) throw InvalidArgument("theta must lie in (0, pi/2)");
    return std::numbers::pi / theta - 2.0;
}

}  // namespace bloewner
