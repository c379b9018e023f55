#include "kerr/special.hpp"
#include "kerr/time_series.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

namespace kerr {

namespace {

int parity_sign(int n) { return (n % 2 == 0) ? 1 : -1; }

std::complex<double> bessel_j_series(int n, std::complex<double> z) {
    // n >= 0
    const std::complex<double> half = 0.5 * z;
    const std::complex<double> half_sq = half * half;
    std::complex<double> term = std::pow(half, n) / std::tgamma(static_cast<double>(n + 1));
    std::complex<double> sum = term;
    for (int k = 1; k < 500; ++k) {
        term *= -half_sq / (static_cast<double>(k) * static_cast<double>(k + n));
        sum += term;
        if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

std::complex<double> bessel_j_trapezoid(int n, std::complex<double> z) {
    // J_n(z) = (1/2pi) int_0^{2pi} exp(i (z sin t - n t)) dt; the trapezoidal rule on a
    // periodic analytic integrand converges geometrically once M exceeds |z| + |n|.
    const int m = 64 + 4 * static_cast<int>(std::ceil(std::abs(z) + std::abs(n)));
    std::complex<double> sum{0.0, 0.0};
    const std::complex<double> i{0.0, 1.0};
    for (int j = 0; j < m; ++j) {
        const double t = 2.0 * std::numbers::pi * j / m;
        sum += std::exp(i * (z * std::sin(t) - static_cast<double>(n) * t));
    }
    return sum / static_cast<double>(m);
}

}  // namespace

double bessel_j(int n, double x) {
    int sign = 1;
    if (n < 0) {
        n = -n;
        sign *= parity_sign(n);
    }
    if (x < 0.0) {
        x = -x;
        sign *= parity_sign(n);
    }
    return sign * std::cyl_bessel_j(static_cast<double>(n), x);
}

std::complex<double> bessel_j(int n, std::complex<double> z) {
    int sign = 1;
    if (n < 0) {
        n = -n;
        sign = parity_sign(n);
    }
    if (std::abs(z) <= 12.0) return static_cast<double>(sign) * bessel_j_series(n, z);
    return static_cast<double>(sign) * bessel_j_trapezoid(n, z);
}

double scaled_bessel_i(int n, double x) {
    if (x < 0.0) throw std::domain_error("scaled_bessel_i: negative argument");
    n = std::abs(n);
    if (x < 600.0) return std::cyl_bessel_i(static_cast<double>(n), x) * std::exp(-x);
    // Hankel asymptotic series, ample for x >= 600 and the orders used here
    const double mu = 4.0 * n * n;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 30; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= -(mu - odd * odd) / (k * 8.0 * x);
        sum += term;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    const QuadratureSpec& spec) {
    double error = 0.0;
    double l1 = 0.0;
    const double value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, spec.max_depth, spec.rel_tol, &error, &l1);
    // relative to the L1 norm of the integrand, so cancelling oscillatory integrals converge
    const double allowed = std::max(spec.rel_tol * l1, spec.abs_tol);
    if (!std::isfinite(value) || error > allowed) {
        throw QuadratureError("adaptive quadrature did not converge: error estimate " +
                                  format_number(error) + " exceeds " + format_number(allowed),
                              error);
    }
    return {value, error};
}

}  // namespace kerr
