#include "catch_amalgamated.hpp"

#include "kerr/special.hpp"

#include <cmath>
#include <complex>
#include <numbers>

using namespace kerr;
using Catch::Approx;

TEST_CASE("integer-order J against the standard library") {
    for (int n = 0; n <= 8; ++n) {
        for (double x : {0.1, 0.72, 1.0, 3.5, 10.0, 25.0, 140.0}) {
            const double ref = std::cyl_bessel_j(static_cast<double>(n), x);
            CHECK(bessel_j(n, x) == Approx(ref).epsilon(1e-10).margin(1e-14));
        }
    }
    CHECK(bessel_j(1, 0.72) == Approx(0.3372).margin(5e-5));
    CHECK(bessel_j(0, 0.0) == 1.0);
    CHECK(bessel_j(3, 0.0) == 0.0);
}

TEST_CASE("negative orders and arguments") {
    for (int n = 1; n <= 5; ++n) {
        const double x = 1.7;
        const double sign = (n % 2 == 0) ? 1.0 : -1.0;
        CHECK(bessel_j(-n, x) == Approx(sign * bessel_j(n, x)).epsilon(1e-14));
        CHECK(bessel_j(n, -x) == Approx(sign * bessel_j(n, x)).epsilon(1e-14));
    }
}

TEST_CASE("complex J reduces to real J on the real axis") {
    for (int n : {0, 1, 2, 5}) {
        for (double x : {0.3, 4.0, 11.0, 13.0, 30.0}) {
            const auto z = bessel_j(n, std::complex<double>(x, 0.0));
            CHECK(z.real() == Approx(bessel_j(n, x)).epsilon(1e-10).margin(1e-13));
            CHECK(std::abs(z.imag()) < 1e-12);
        }
    }
}

TEST_CASE("J on the imaginary axis is i^n I_n") {
    for (int n : {0, 1, 2, 3}) {
        for (double y : {0.2, 2.0, 8.0, 15.0}) {
            const auto z = bessel_j(n, std::complex<double>(0.0, y));
            const auto ref = std::pow(std::complex<double>(0.0, 1.0), n) * std::cyl_bessel_i(double(n), y);
            CHECK(std::abs(z - ref) < 1e-10 * std::abs(ref));
        }
    }
}

TEST_CASE("complex J recurrence") {
    const std::complex<double> z(2.3, -1.1);
    for (int n = 1; n <= 4; ++n) {
        const auto lhs = bessel_j(n - 1, z) + bessel_j(n + 1, z);
        const auto rhs = 2.0 * double(n) / z * bessel_j(n, z);
        CHECK(std::abs(lhs - rhs) < 1e-12);
    }
    const std::complex<double> big(14.0, 2.0);
    const auto lhs = bessel_j(1, big) + bessel_j(3, big);
    CHECK(std::abs(lhs - 4.0 / big * bessel_j(2, big)) < 1e-10 * std::abs(lhs));
}

TEST_CASE("scaled modified Bessel I") {
    for (int n : {0, 1, 3, 15}) {
        for (double x : {0.0, 0.5, 5.0, 50.0, 300.0}) {
            const double ref = std::exp(-x) * std::cyl_bessel_i(double(n), x);
            CHECK(scaled_bessel_i(n, x) == Approx(ref).epsilon(1e-10).margin(1e-300));
        }
    }
    // unscaled I overflows here
    const double v = scaled_bessel_i(1, 1000.0);
    CHECK(std::isfinite(v));
    CHECK(v == Approx(1.0 / std::sqrt(2.0 * std::numbers::pi * 1000.0)).epsilon(1e-3));
    CHECK(scaled_bessel_i(-2, 3.0) == Approx(scaled_bessel_i(2, 3.0)));
    for (int n : {0, 1, 7, 15}) {
        CHECK(scaled_bessel_i(n, 600.0 - 1e-9) == Approx(scaled_bessel_i(n, 600.0 + 1e-9)).epsilon(1e-10));
    }
    CHECK_THROWS(scaled_bessel_i(1, -1.0));
}

TEST_CASE("adaptive quadrature") {
    const auto r = integrate_adaptive([](double x) { return std::exp(-x * x); }, -8.0, 8.0);
    CHECK(r.value == Approx(std::sqrt(std::numbers::pi)).epsilon(1e-12));
    CHECK(r.error >= 0.0);

    const auto osc = integrate_adaptive([](double x) { return std::cos(50.0 * x); }, 0.0, std::numbers::pi);
    CHECK(std::abs(osc.value) < 1e-10);

    QuadratureSpec tight;
    tight.rel_tol = 1e-14;
    tight.abs_tol = 0.0;
    tight.max_depth = 1;
    try {
        integrate_adaptive([](double x) { return std::sin(300.0 * x) * std::exp(x); }, 0.0, 3.0, tight);
        FAIL("expected QuadratureError");
    } catch (const QuadratureError& e) {
        CHECK(e.achieved_error() > 0.0);
    }
}
