#pragma once

#include <complex>
#include <functional>
#include <stdexcept>

namespace kerr {

/// J_n(x) for integer order (negative orders and arguments allowed).
double bessel_j(int n, double x);

/// J_n(z) for integer order and complex argument. Power series for |z| <= 12,
/// trapezoidal rule on the periodic Bessel integral otherwise.
std::complex<double> bessel_j(int n, std::complex<double> z);

/// exp(-x) I_n(x) for x >= 0. Stays finite where I_n(x) itself would overflow.
double scaled_bessel_i(int n, double x);

class QuadratureError : public std::runtime_error {
public:
    QuadratureError(const std::string& what, double achieved) : std::runtime_error(what), achieved_(achieved) {}
    double achieved_error() const { return achieved_; }

private:
    double achieved_;
};

struct QuadratureSpec {
    double rel_tol = 1e-8;
    double abs_tol = 1e-14;
    unsigned max_depth = 30;
};

struct QuadratureResult {
    double value;
    double error;
};

/// Adaptive 15-point Gauss-Kronrod on [a, b]. Throws QuadratureError when the error
/// estimate exceeds max(rel_tol * int|f|, abs_tol).
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    const QuadratureSpec& spec = {});

}  // namespace kerr
