#pragma once

#include "kerr/model.hpp"
#include "kerr/quantum.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace kerr::lindblad {

using DensityMatrix = Eigen::MatrixXcd;
using quantum::KerrOperatorSet;

/// Bose-Einstein occupation 1/(e^epsilon - 1).
double thermal_nbar(double epsilon);

/// n-bar of the bath, zero when no temperature is given.
double bath_occupation(const OscillatorParams& params);

DensityMatrix pure_density(const quantum::StateVector& psi);

/// Master-equation generator with H = n + 1/2 + chi n(n-1) - g(t)/2 X^2, damping
/// gamma (n+1) D[a] and thermal pumping gamma n D[a^dagger]. In the truncated space the
/// a a^dagger of D[a^dagger] is taken with its top entry zeroed so the generator keeps
/// the trace exactly.
DensityMatrix lindblad_rhs(const DensityMatrix& rho, double t, const KerrOperatorSet& ops,
                           const OscillatorParams& params, const std::optional<KickPulse>& pulse);

class TraceDriftError : public quantum::PropagationError {
public:
    using quantum::PropagationError::PropagationError;
};

struct DensityRunOptions {
    double dt_free = 1e-4;
    double dt_pulse = 1e-5;
    /// rho -> U rho U^dagger at tau instead of integrating through the pulse.
    bool impulsive = false;
    /// Output times at which rho is copied out.
    std::vector<double> snapshot_times;
    /// Number of evenly spaced output samples with an eigenvalue check.
    std::size_t eigen_checks = 10;
    double max_trace_drift = 1e-6;
};

struct DensityDiagnostics {
    double max_trace_drift = 0.0;
    double max_hermiticity_residual = 0.0;
    double min_eigenvalue = 0.0;
    std::vector<double> eigen_check_times;
    /// tr rho^2 at every output sample
    std::vector<double> purity;
};

struct DensitySnapshot {
    double time;
    DensityMatrix rho;
};

struct DensityRunResult {
    std::vector<double> times;
    std::vector<cplx> mean_a;
    DensityDiagnostics diagnostics;
    std::vector<DensitySnapshot> snapshots;

    std::vector<double> mean_q() const;
};

/// Integrating-factor RK4 with the diagonal part of the generator treated exactly.
/// Throws TraceDriftError when |tr rho - 1| exceeds options.max_trace_drift; the trace
/// is never renormalised.
DensityRunResult propagate_density(const DensityMatrix& rho0, const KerrOperatorSet& ops,
                                   const OscillatorParams& params, const std::optional<KickPulse>& pulse,
                                   const TimeGrid& grid, const DensityRunOptions& options = {});

cplx expectation_a(const DensityMatrix& rho);

enum class DampingMode {
    full,        ///< exact zero-temperature solution
    simplified,  ///< 2 i chi -> 2 i chi + gamma in the free closed forms
};

/// Zero-temperature <a(t)> for a coherent or cat initial state. A finite temperature
/// (params.epsilon set) throws InvalidParameter.
cplx damped_mean_a_analytic(const InitialState& state, const OscillatorParams& params, double t,
                            DampingMode mode = DampingMode::full);

struct SuppressionFactor {
    double exact;       ///< exp(|alpha|^2 (e^{-gamma t} - 1))
    double linearized;  ///< exp(-|alpha|^2 gamma t)
};

SuppressionFactor revival_suppression_factor(double alpha0_abs, double gamma, double t);

}  // namespace kerr::lindblad
