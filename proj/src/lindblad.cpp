#include "kerr/lindblad.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace kerr::lindblad {

namespace {

constexpr cplx kI{0.0, 1.0};

// Diagonal part Lambda_mn of the generator (acts elementwise) and the weights of the
// off-diagonal jump terms.
struct Generator {
    Eigen::MatrixXcd lambda;
    Eigen::MatrixXd jump;  // sqrt((m+1)(n+1)) for m, n < n_max
    double down = 0.0;     // gamma (nbar + 1)
    double up = 0.0;       // gamma nbar
};

Generator make_generator(const KerrOperatorSet& ops, const OscillatorParams& params) {
    const auto d = static_cast<Eigen::Index>(ops.dimension());
    const double nbar = bath_occupation(params);
    Generator g;
    g.down = params.gamma * (nbar + 1.0);
    g.up = params.gamma * nbar;
    auto aad = [d](Eigen::Index k) { return k + 1 < d ? static_cast<double>(k + 1) : 0.0; };
    g.lambda.resize(d, d);
    for (Eigen::Index n = 0; n < d; ++n) {
        for (Eigen::Index m = 0; m < d; ++m) {
            const double decay = 0.5 * g.down * static_cast<double>(m + n) + 0.5 * g.up * (aad(m) + aad(n));
            g.lambda(m, n) = cplx(-decay, -(ops.energies[m] - ops.energies[n]));
        }
    }
    Eigen::VectorXd w(d - 1);
    for (Eigen::Index k = 0; k + 1 < d; ++k) w[k] = std::sqrt(static_cast<double>(k + 1));
    g.jump = w * w.transpose();
    return g;
}

// Everything except the diagonal part.
DensityMatrix off_diagonal_part(const DensityMatrix& rho, double gval, const KerrOperatorSet& ops,
                                const Generator& gen) {
    const Eigen::Index d = rho.rows();
    DensityMatrix out = DensityMatrix::Zero(d, d);
    if (gval != 0.0) {
        // i g/2 (X^2 rho - rho X^2); the diagonal of X^2 is kept here too
        DensityMatrix x2rho = ops.x2_diag.asDiagonal() * rho;
        x2rho.topRows(d - 2) += ops.x2_off.asDiagonal() * rho.bottomRows(d - 2);
        x2rho.bottomRows(d - 2) += ops.x2_off.asDiagonal() * rho.topRows(d - 2);
        DensityMatrix rhox2 = rho * ops.x2_diag.asDiagonal();
        rhox2.leftCols(d - 2) += rho.rightCols(d - 2) * ops.x2_off.asDiagonal();
        rhox2.rightCols(d - 2) += rho.leftCols(d - 2) * ops.x2_off.asDiagonal();
        out = (kI * (0.5 * gval)) * (x2rho - rhox2);
    }
    if (gen.down != 0.0) {
        out.topLeftCorner(d - 1, d - 1).array() +=
            gen.down * gen.jump.array().cast<cplx>() * rho.bottomRightCorner(d - 1, d - 1).array();
    }
    if (gen.up != 0.0) {
        out.bottomRightCorner(d - 1, d - 1).array() +=
            gen.up * gen.jump.array().cast<cplx>() * rho.topLeftCorner(d - 1, d - 1).array();
    }
    return out;
}

struct StepExponentials {
    double h = -1.0;
    Eigen::ArrayXXcd full;
    Eigen::ArrayXXcd half;

    void update(const Generator& gen, double step) {
        if (step == h) return;
        h = step;
        full = (gen.lambda.array() * step).exp();
        half = (gen.lambda.array() * (0.5 * step)).exp();
    }
};

DensityMatrix integrate_segment(const DensityMatrix& rho, double t0, double t1, double max_step,
                                const KerrOperatorSet& ops, const Generator& gen,
                                const std::optional<KickPulse>& pulse, StepExponentials& cache) {
    const auto steps = static_cast<long>(std::ceil((t1 - t0) / max_step - 1e-9));
    const double h = (t1 - t0) / static_cast<double>(steps);
    cache.update(gen, h);
    const bool trivial = !pulse && gen.down == 0.0 && gen.up == 0.0;
    auto nonlinear = [&](double t, const DensityMatrix& y) {
        return off_diagonal_part(y, pulse ? pulse_value(*pulse, t) : 0.0, ops, gen);
    };
    Eigen::ArrayXXcd y = rho.array();
    for (long s = 0; s < steps; ++s) {
        if (trivial) {
            y = cache.full * y;
            continue;
        }
        const double t = t0 + static_cast<double>(s) * h;
        const Eigen::ArrayXXcd k1 = nonlinear(t, y.matrix()).array();
        const Eigen::ArrayXXcd k2 = nonlinear(t + 0.5 * h, (cache.half * (y + 0.5 * h * k1)).matrix()).array();
        const Eigen::ArrayXXcd k3 = nonlinear(t + 0.5 * h, (cache.half * y + 0.5 * h * k2).matrix()).array();
        const Eigen::ArrayXXcd k4 = nonlinear(t + h, (cache.full * y + h * cache.half * k3).matrix()).array();
        y = cache.full * y + (h / 6.0) * (cache.full * k1 + 2.0 * cache.half * (k2 + k3) + k4);
    }
    return y.matrix();
}

}  // namespace

double thermal_nbar(double epsilon) {
    if (!(epsilon > 0.0)) throw InvalidParameter("thermal_nbar: epsilon must be > 0");
    return 1.0 / std::expm1(epsilon);
}

double bath_occupation(const OscillatorParams& params) {
    return params.epsilon ? thermal_nbar(*params.epsilon) : 0.0;
}

DensityMatrix pure_density(const quantum::StateVector& psi) { return psi * psi.adjoint(); }

DensityMatrix lindblad_rhs(const DensityMatrix& rho, double t, const KerrOperatorSet& ops,
                           const OscillatorParams& params, const std::optional<KickPulse>& pulse) {
    if (rho.rows() != static_cast<Eigen::Index>(ops.dimension()) || rho.cols() != rho.rows()) {
        throw InvalidParameter("lindblad_rhs: density matrix does not match the operator dimension");
    }
    const Generator gen = make_generator(ops, params);
    DensityMatrix out = off_diagonal_part(rho, pulse ? pulse_value(*pulse, t) : 0.0, ops, gen);
    out.array() += gen.lambda.array() * rho.array();
    return out;
}

cplx expectation_a(const DensityMatrix& rho) {
    cplx sum{0.0, 0.0};
    for (Eigen::Index n = 0; n + 1 < rho.rows(); ++n) sum += std::sqrt(static_cast<double>(n + 1)) * rho(n + 1, n);
    return sum;
}

std::vector<double> DensityRunResult::mean_q() const {
    std::vector<double> out;
    out.reserve(mean_a.size());
    for (cplx a : mean_a) out.push_back(std::sqrt(2.0) * a.real());
    return out;
}

DensityRunResult propagate_density(const DensityMatrix& rho0, const KerrOperatorSet& ops,
                                   const OscillatorParams& params, const std::optional<KickPulse>& pulse,
                                   const TimeGrid& grid, const DensityRunOptions& options) {
    if (rho0.rows() != static_cast<Eigen::Index>(ops.dimension()) || rho0.cols() != rho0.rows()) {
        throw InvalidParameter("propagate_density: density matrix does not match the operator dimension");
    }
    if (!(options.dt_free > 0.0) || !(options.dt_pulse > 0.0)) {
        throw InvalidParameter("propagate_density: step sizes must be > 0");
    }
    const Generator gen = make_generator(ops, params);
    StepExponentials free_cache, pulse_cache;
    Eigen::MatrixXcd kick;
    if (pulse && options.impulsive) kick = quantum::kick_unitary_matrix(ops, pulse->g0);

    DensityRunResult result;
    result.times = grid.samples();
    const std::size_t n_out = result.times.size();
    std::vector<bool> eigen_check(n_out, false);
    if (options.eigen_checks > 0) {
        const std::size_t checks = std::min(options.eigen_checks, n_out);
        for (std::size_t c = 0; c < checks; ++c) {
            eigen_check[checks == 1 ? 0 : c * (n_out - 1) / (checks - 1)] = true;
        }
    }
    const double trace0 = rho0.trace().real();
    DensityDiagnostics& diag = result.diagnostics;
    diag.min_eigenvalue = std::numeric_limits<double>::infinity();

    auto advance = [&](const DensityMatrix& rho, double a, double b) -> DensityMatrix {
        // [a, b] lies entirely inside or outside the pulse window here
        if (b <= a) return rho;
        if (pulse && !options.impulsive) {
            const auto [w0, w1] = pulse->window();
            if (a >= w0 && b <= w1) {
                return integrate_segment(rho, a, b, options.dt_pulse, ops, gen, pulse, pulse_cache);
            }
        }
        return integrate_segment(rho, a, b, options.dt_free, ops, gen, std::nullopt, free_cache);
    };

    DensityMatrix rho = rho0;
    double t = grid.t_start;
    for (std::size_t i = 0; i < n_out; ++i) {
        const double target = result.times[i];
        std::vector<double> cuts{t};
        if (pulse) {
            if (options.impulsive) {
                cuts.push_back(pulse->tau);
            } else {
                cuts.push_back(pulse->window().first);
                cuts.push_back(pulse->window().second);
            }
        }
        cuts.push_back(target);
        std::sort(cuts.begin(), cuts.end());
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double a = std::clamp(cuts[c], t, target);
            const double b = std::clamp(cuts[c + 1], t, target);
            rho = advance(rho, a, b);
            if (pulse && options.impulsive && b == pulse->tau && a < b) rho = kick * rho * kick.adjoint();
        }
        t = target;

        const double drift = std::abs(rho.trace().real() - trace0);
        diag.max_trace_drift = std::max(diag.max_trace_drift, drift);
        if (drift > options.max_trace_drift) {
            throw TraceDriftError("trace drift " + std::to_string(drift) + " at t = " + std::to_string(t) +
                                      " exceeds " + std::to_string(options.max_trace_drift),
                                  drift);
        }
        diag.max_hermiticity_residual =
            std::max(diag.max_hermiticity_residual, (rho - rho.adjoint()).cwiseAbs().maxCoeff());
        diag.purity.push_back(rho.cwiseAbs2().sum());
        if (eigen_check[i]) {
            const Eigen::MatrixXcd herm = 0.5 * (rho + rho.adjoint());
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(herm, Eigen::EigenvaluesOnly);
            diag.min_eigenvalue = std::min(diag.min_eigenvalue, solver.eigenvalues().minCoeff());
            diag.eigen_check_times.push_back(t);
        }
        result.mean_a.push_back(expectation_a(rho));
        for (double ts : options.snapshot_times) {
            if (ts == target) result.snapshots.push_back({target, rho});
        }
    }
    if (diag.eigen_check_times.empty()) diag.min_eigenvalue = 0.0;
    return result;
}

cplx damped_mean_a_analytic(const InitialState& state, const OscillatorParams& params, double t, DampingMode mode) {
    if (params.epsilon) {
        throw InvalidParameter("damped_mean_a_analytic: only the zero-temperature case has a closed form");
    }
    const quantum::Superposition s = std::holds_alternative<CoherentSpec>(state)
                                         ? quantum::Superposition{{cplx(1.0, 0.0)}, {std::get<CoherentSpec>(state).alpha0}}
                                         : quantum::cat_superposition(std::get<CatSpec>(state));
    const double gamma = params.gamma;
    const cplx kappa(gamma, 2.0 * params.chi);
    const cplx decay = std::exp(-kappa * t);
    // coefficient of alpha beta* in the exponent; gamma = 0 reduces to e^{-2 i chi t}
    cplx mixing = decay;
    double prefactor_decay = 1.0;
    if (mode == DampingMode::full) {
        if (kappa != 0.0) mixing += gamma / kappa * (1.0 - decay);
        prefactor_decay = std::exp(-0.5 * gamma * t);
    }
    cplx sum{0.0, 0.0};
    for (std::size_t j = 0; j < s.amplitudes.size(); ++j) {
        for (std::size_t k = 0; k < s.amplitudes.size(); ++k) {
            const cplx beta = s.amplitudes[j];
            const cplx alpha = s.amplitudes[k];
            const cplx element = alpha * std::polar(1.0, -t) * prefactor_decay *
                                 std::exp(-0.5 * (std::norm(alpha) + std::norm(beta)) + alpha * std::conj(beta) * mixing);
            sum += std::conj(s.coefficients[j]) * s.coefficients[k] * element;
        }
    }
    return sum / s.norm_squared();
}

SuppressionFactor revival_suppression_factor(double alpha0_abs, double gamma, double t) {
    const double a2 = alpha0_abs * alpha0_abs;
    return {std::exp(a2 * std::expm1(-gamma * t)), std::exp(-a2 * gamma * t)};
}

}  // namespace kerr::lindblad
