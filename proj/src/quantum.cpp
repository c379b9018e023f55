#include "kerr/quantum.hpp"
#include "kerr/special.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>

#include "kerr/time_series.hpp"

namespace kerr::quantum {

namespace {

constexpr cplx kI{0.0, 1.0};
constexpr double kTwoPi = 2.0 * std::numbers::pi;

long long positive_mod(long long a, long long m) {
    const long long r = a % m;
    return r < 0 ? r + m : r;
}

// exp(2 pi i num / den) with the numerator reduced exactly first
cplx unit_root(long long num, long long den) {
    const double angle = kTwoPi * static_cast<double>(positive_mod(num, den)) / static_cast<double>(den);
    return std::polar(1.0, angle);
}

Eigen::VectorXcd phases(const KerrOperatorSet& ops, double t) {
    Eigen::VectorXcd out(ops.energies.size());
    for (Eigen::Index n = 0; n < out.size(); ++n) out[n] = std::polar(1.0, -ops.energies[n] * t);
    return out;
}

void check_fock(const FockSpaceSpec& fock) {
    if (fock.n_max < 2) throw InvalidParameter("fock.n_max must be >= 2");
}

}  // namespace

StateVector KerrOperatorSet::apply_x2(const StateVector& psi) const {
    const Eigen::Index d = psi.size();
    StateVector out = x2_diag.cast<cplx>().cwiseProduct(psi);
    for (Eigen::Index n = 0; n + 2 < d; ++n) {
        out[n + 2] += x2_off[n] * psi[n];
        out[n] += x2_off[n] * psi[n + 2];
    }
    return out;
}

Eigen::MatrixXd KerrOperatorSet::x2_dense() const {
    const Eigen::Index d = x2_diag.size();
    Eigen::MatrixXd m = x2_diag.asDiagonal();
    for (Eigen::Index n = 0; n + 2 < d; ++n) {
        m(n + 2, n) = x2_off[n];
        m(n, n + 2) = x2_off[n];
    }
    return m;
}

KerrOperatorSet build_operators(double chi, const FockSpaceSpec& fock) {
    check_fock(fock);
    const auto d = static_cast<Eigen::Index>(fock.dimension());
    KerrOperatorSet ops;
    ops.chi = chi;
    ops.energies.resize(d);
    ops.x2_diag.resize(d);
    ops.x2_off.resize(d - 2);
    for (Eigen::Index n = 0; n < d; ++n) {
        const double dn = static_cast<double>(n);
        ops.energies[n] = dn + 0.5 + chi * dn * (dn - 1.0);
        ops.x2_diag[n] = 2.0 * dn + 1.0;
        if (n + 2 < d) ops.x2_off[n] = std::sqrt((dn + 1.0) * (dn + 2.0));
    }
    return ops;
}

StateVector coherent_state_vector(cplx alpha0, const FockSpaceSpec& fock) {
    check_fock(fock);
    const double tail = coherent_tail_weight(std::abs(alpha0), fock.n_max);
    if (tail >= kTailTolerance) {
        throw CutoffError("fock.n_max = " + std::to_string(fock.n_max) + " leaves tail weight " +
                              std::to_string(tail) + " for |alpha| = " + std::to_string(std::abs(alpha0)),
                          tail);
    }
    StateVector psi(fock.dimension());
    psi[0] = std::exp(-0.5 * std::norm(alpha0));
    for (std::size_t n = 1; n <= fock.n_max; ++n) {
        psi[static_cast<Eigen::Index>(n)] = psi[static_cast<Eigen::Index>(n - 1)] * alpha0 / std::sqrt(static_cast<double>(n));
    }
    return psi / psi.norm();
}

StateVector cat_state_vector(const CatSpec& cat, const FockSpaceSpec& fock) {
    if (cat.n_plus < 0.0 || cat.n_minus < 0.0) throw InvalidParameter("cat weights must be non-negative");
    StateVector psi = cat.n_plus * coherent_state_vector(cat.alpha0, fock) +
                      cat.n_minus * std::polar(1.0, cat.theta) * coherent_state_vector(-cat.alpha0, fock);
    const double norm = psi.norm();
    if (!(norm * norm > 1e-14)) throw InvalidParameter("cat state is not normalizable");
    return psi / norm;
}

StateVector prepare_state(const InitialState& state, const FockSpaceSpec& fock) {
    if (const auto* coh = std::get_if<CoherentSpec>(&state)) return coherent_state_vector(coh->alpha0, fock);
    return cat_state_vector(std::get<CatSpec>(state), fock);
}

StateVector evolve_free(const StateVector& psi, const KerrOperatorSet& ops, double t) {
    return phases(ops, t).cwiseProduct(psi);
}

StateVector evolve_pulse_window(const StateVector& psi, const KerrOperatorSet& ops, const KickPulse& pulse,
                                double t0, double t1, double max_step) {
    if (t1 < t0) throw InvalidParameter("evolve_pulse_window: t1 < t0");
    if (!(max_step > 0.0)) throw InvalidParameter("evolve_pulse_window: max_step must be > 0");
    if (t1 == t0) return psi;
    const auto steps = static_cast<long>(std::ceil((t1 - t0) / max_step - 1e-9));
    const double h = (t1 - t0) / static_cast<double>(steps);
    const Eigen::VectorXcd full = phases(ops, h);
    const Eigen::VectorXcd half = phases(ops, 0.5 * h);

    // interaction part: d|psi>/dt = i g(t)/2 X^2 |psi>
    auto nonlinear = [&](double t, const StateVector& y) -> StateVector {
        return (kI * (0.5 * pulse_value(pulse, t))) * ops.apply_x2(y);
    };

    const double norm0 = psi.norm();
    StateVector y = psi;
    for (long s = 0; s < steps; ++s) {
        const double t = t0 + static_cast<double>(s) * h;
        const StateVector k1 = nonlinear(t, y);
        const StateVector k2 = nonlinear(t + 0.5 * h, half.cwiseProduct(y + (0.5 * h) * k1));
        const StateVector k3 = nonlinear(t + 0.5 * h, half.cwiseProduct(y) + (0.5 * h) * k2);
        const StateVector k4 = nonlinear(t + h, full.cwiseProduct(y) + h * half.cwiseProduct(k3));
        y = full.cwiseProduct(y) +
            (h / 6.0) * (full.cwiseProduct(k1) + 2.0 * half.cwiseProduct(k2 + k3) + k4);
    }
    const double drift = std::abs(y.norm() - norm0);
    if (!(drift <= 1e-9)) {
        throw PropagationError("norm drift " + std::to_string(drift) + " through the pulse window exceeds 1e-9",
                               drift);
    }
    return y;
}

Eigen::MatrixXcd kick_unitary_matrix(const KerrOperatorSet& ops, double g0) {
    const Eigen::MatrixXcd generator = (kI * (0.5 * g0)) * ops.x2_dense().cast<cplx>();
    return generator.exp();
}

StateVector impulsive_kick_unitary(const StateVector& psi, const KerrOperatorSet& ops, double g0) {
    if (g0 == 0.0) return psi;
    return kick_unitary_matrix(ops, g0) * psi;
}

cplx squeeze_kick_amplitude(cplx alpha, double g0, DisplacementForm form) {
    static std::atomic<bool> warned{false};
    if (std::abs(g0) > 0.1 && !warned.exchange(true)) {
        std::clog << "warning: kick strength " << g0
                  << " is outside the weak-kick regime; neglected vacuum squeezing may matter\n";
    }
    switch (form) {
        case DisplacementForm::squeeze:
            return std::cosh(g0) * alpha + kI * std::sinh(g0) * std::conj(alpha);
        case DisplacementForm::linearized:
            return alpha + kI * g0 * std::conj(alpha);
        case DisplacementForm::shear:
            return alpha + kI * g0 * (alpha + std::conj(alpha));
    }
    throw InvalidParameter("unknown displacement form");
}

cplx expectation_a(const StateVector& psi) {
    cplx sum{0.0, 0.0};
    for (Eigen::Index n = 0; n + 1 < psi.size(); ++n) {
        sum += std::sqrt(static_cast<double>(n + 1)) * std::conj(psi[n]) * psi[n + 1];
    }
    return sum / psi.squaredNorm();
}

double expectation_q(const StateVector& psi) { return std::sqrt(2.0) * expectation_a(psi).real(); }

double expectation_n(const StateVector& psi) {
    double sum = 0.0;
    for (Eigen::Index n = 0; n < psi.size(); ++n) sum += static_cast<double>(n) * std::norm(psi[n]);
    return sum / psi.squaredNorm();
}

double fidelity(const StateVector& phi, const StateVector& psi) {
    return std::norm(phi.dot(psi)) / (phi.squaredNorm() * psi.squaredNorm());
}

cplx coherent_matrix_element(cplx beta, cplx alpha, double chi, double t) {
    const cplx rotated = std::conj(beta) * alpha * std::polar(1.0, -2.0 * chi * t);
    return alpha * std::polar(1.0, -t) * std::exp(-0.5 * (std::norm(alpha) + std::norm(beta)) + rotated);
}

cplx coherent_overlap(cplx beta, cplx alpha) {
    return std::exp(-0.5 * (std::norm(alpha) + std::norm(beta)) + std::conj(beta) * alpha);
}

double Superposition::norm_squared() const {
    cplx sum{0.0, 0.0};
    for (std::size_t j = 0; j < amplitudes.size(); ++j) {
        for (std::size_t k = 0; k < amplitudes.size(); ++k) {
            sum += std::conj(coefficients[j]) * coefficients[k] * coherent_overlap(amplitudes[j], amplitudes[k]);
        }
    }
    return sum.real();
}

cplx Superposition::mean_a(double chi, double t) const {
    cplx sum{0.0, 0.0};
    for (std::size_t j = 0; j < amplitudes.size(); ++j) {
        for (std::size_t k = 0; k < amplitudes.size(); ++k) {
            sum += std::conj(coefficients[j]) * coefficients[k] *
                   coherent_matrix_element(amplitudes[j], amplitudes[k], chi, t);
        }
    }
    return sum / norm_squared();
}

StateVector Superposition::to_fock(const FockSpaceSpec& fock) const {
    StateVector psi = StateVector::Zero(static_cast<Eigen::Index>(fock.dimension()));
    for (std::size_t j = 0; j < amplitudes.size(); ++j) {
        psi += coefficients[j] * coherent_state_vector(amplitudes[j], fock);
    }
    return psi;
}

Superposition cat_superposition(const CatSpec& cat) {
    return {{cplx(cat.n_plus, 0.0), cat.n_minus * std::polar(1.0, cat.theta)}, {cat.alpha0, -cat.alpha0}};
}

cplx analytic_mean_a_coherent(cplx alpha0, double chi, double t) {
    return coherent_matrix_element(alpha0, alpha0, chi, t);
}

cplx analytic_mean_a_cat(const CatSpec& cat, double chi, double t) {
    const double d2 = cat.norm_squared();
    if (!(d2 > 0.0)) throw InvalidParameter("cat state is not normalizable");
    const Superposition s = cat_superposition(cat);
    cplx sum{0.0, 0.0};
    for (std::size_t j = 0; j < 2; ++j) {
        for (std::size_t k = 0; k < 2; ++k) {
            sum += std::conj(s.coefficients[j]) * s.coefficients[k] *
                   coherent_matrix_element(s.amplitudes[j], s.amplitudes[k], chi, t);
        }
    }
    return sum / d2;
}

RevivalTimes revival_times(double chi, const std::vector<int>& nus) {
    if (!(chi > 0.0)) throw InvalidParameter("revival_times: chi must be > 0 (no revivals without anharmonicity)");
    RevivalTimes out{kTwoPi / chi, {}};
    for (int nu : nus) {
        if (nu < 1) throw InvalidParameter("revival_times: nu must be >= 1");
        out.fractional.push_back(out.t_rev / nu);
    }
    return out;
}

cplx gauss_sum_direct(int nu, int k) {
    if (nu < 1) throw InvalidParameter("gauss_sum_direct: nu must be >= 1");
    cplx sum{0.0, 0.0};
    for (long long l = 0; l < nu; ++l) sum += unit_root(-(l * l + l * (k - 1)), nu);
    return sum / static_cast<double>(nu);
}

cplx gauss_sum_closed_form(int nu, int k) {
    if (nu < 1 || nu % 2 == 0) throw InvalidParameter("gauss_sum_closed_form: only odd nu is supported");
    // completing the square with 1/2 = (nu+1)/2 mod nu gives exponent (nu+1)^2 (k-1)^2 / (4 nu)
    const long long km1 = k - 1;
    const long long num = positive_mod(static_cast<long long>(nu + 1) * (nu + 1), 4LL * nu) *
                          positive_mod(km1 * km1, 4LL * nu);
    const cplx prefactor = (nu % 4 == 1) ? cplx(1.0, 0.0) : cplx(0.0, -1.0);
    return prefactor / std::sqrt(static_cast<double>(nu)) * unit_root(num, 4LL * nu);
}

RevivalDecomposition fractional_revival_decomposition(cplx alpha0, double chi, int nu) {
    if (nu < 2) throw InvalidParameter("fractional_revival_decomposition: nu must be >= 2");
    if (!(chi > 0.0)) throw InvalidParameter("fractional_revival_decomposition: chi must be > 0");
    RevivalDecomposition out;
    out.nu = nu;
    out.time = kTwoPi / (chi * nu);
    const cplx rotation = std::polar(1.0, -out.time);
    for (int k = 0; k < nu; ++k) {
        out.coefficients.push_back(gauss_sum_direct(nu, k));
        out.amplitudes.push_back(alpha0 * rotation * unit_root(k, nu));
    }
    return out;
}

int selection_rule(int nu, int r_star) {
    if (nu < 3 || nu % 4 != 3) throw InvalidParameter("selection_rule: requires nu mod 4 = 3");
    return static_cast<int>(positive_mod(4LL * r_star - 2, nu));
}

std::vector<cplx> kicked_mean_a_superposition(cplx alpha0, double chi, double g0, int nu,
                                              const std::vector<double>& times, DisplacementForm form) {
    if (nu < 3 || nu % 2 == 0) throw InvalidParameter("kicked_mean_a_superposition: nu must be odd and >= 3");
    const RevivalDecomposition dec = fractional_revival_decomposition(alpha0, chi, nu);
    Superposition kicked;
    kicked.coefficients = dec.coefficients;
    for (cplx a : dec.amplitudes) kicked.amplitudes.push_back(squeeze_kick_amplitude(a, g0, form));
    std::vector<cplx> out;
    out.reserve(times.size());
    for (double t : times) {
        if (!(t > dec.time)) throw InvalidParameter("kicked_mean_a_superposition: requires t > tau");
        out.push_back(kicked.mean_a(chi, t - dec.time));
    }
    return out;
}

cplx kicked_mean_a_superposition(cplx alpha0, double chi, double g0, int nu, double t, DisplacementForm form) {
    return kicked_mean_a_superposition(alpha0, chi, g0, nu, std::vector<double>{t}, form).front();
}

cplx echo_z(double alpha0_abs, double chi, double g0, double tau, int l, double t) {
    return 2.0 * alpha0_abs * alpha0_abs * g0 *
           (std::polar(1.0, -2.0 * chi * (t - tau)) - std::cos(chi * static_cast<double>(l) * tau));
}

EchoPrediction kicked_echo_prediction(cplx alpha0, double chi, double g0, int nu, int r_star, double t) {
    if (!(chi > 0.0)) throw InvalidParameter("kicked_echo_prediction: chi must be > 0");
    EchoPrediction p;
    p.r_star = r_star;
    p.l = selection_rule(nu, r_star);
    p.tau = kTwoPi / (chi * nu);
    p.t_echo = r_star > 0 ? 2.0 * r_star * p.tau : std::numbers::pi / chi + 2.0 * r_star * p.tau;
    const double a = std::abs(alpha0);
    p.z = echo_z(a, chi, g0, p.tau, p.l, t);
    p.mean_a = bessel_j(r_star, kI * p.z) * analytic_mean_a_coherent(alpha0, chi, t - 2.0 * r_star * p.tau);
    p.amplitude = std::abs(bessel_j(r_star, kI * echo_z(a, chi, g0, p.tau, p.l, p.t_echo)));
    return p;
}

StateVector propagate(const StateVector& psi, const KerrOperatorSet& ops, const std::optional<KickPulse>& pulse,
                      double t0, double t1, const QuantumRunOptions& options) {
    if (t1 < t0) throw InvalidParameter("propagate: t1 < t0");
    if (!pulse) return evolve_free(psi, ops, t1 - t0);
    if (options.impulsive) {
        if (t0 < pulse->tau && pulse->tau <= t1) {
            StateVector mid = evolve_free(psi, ops, pulse->tau - t0);
            mid = impulsive_kick_unitary(mid, ops, pulse->g0);
            return evolve_free(mid, ops, t1 - pulse->tau);
        }
        return evolve_free(psi, ops, t1 - t0);
    }
    const auto [w0, w1] = pulse->window();
    StateVector y = psi;
    double t = t0;
    if (t < w0) {
        const double next = std::min(w0, t1);
        y = evolve_free(y, ops, next - t);
        t = next;
    }
    if (t < w1 && t < t1) {
        const double next = std::min(w1, t1);
        y = evolve_pulse_window(y, ops, *pulse, t, next, options.dt_pulse);
        t = next;
    }
    if (t < t1) y = evolve_free(y, ops, t1 - t);
    return y;
}

std::vector<double> ExpectationTrace::mean_q() const {
    std::vector<double> out;
    out.reserve(mean_a.size());
    for (cplx a : mean_a) out.push_back(std::sqrt(2.0) * a.real());
    return out;
}

ExpectationTrace evolve_trace(const StateVector& psi, const KerrOperatorSet& ops,
                              const std::optional<KickPulse>& pulse, const TimeGrid& grid,
                              const QuantumRunOptions& options) {
    ExpectationTrace trace;
    trace.times = grid.samples();
    const double norm0 = psi.norm();
    StateVector y = psi;
    double t = grid.t_start;
    for (double ts : trace.times) {
        y = propagate(y, ops, pulse, t, ts, options);
        t = ts;
        trace.mean_a.push_back(expectation_a(y));
        trace.max_norm_drift = std::max(trace.max_norm_drift, std::abs(y.norm() - norm0));
    }
    return trace;
}

void write_state_csv(const std::filesystem::path& path, const StateVector& psi) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index n = 0; n < psi.size(); ++n) {
        rows.push_back({static_cast<double>(n), psi[n].real(), psi[n].imag()});
    }
    write_csv(path, {"n", "re", "im"}, rows);
}

}  // namespace kerr::quantum
