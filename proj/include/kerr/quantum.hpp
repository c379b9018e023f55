#pragma once

#include "kerr/model.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace kerr::quantum {

/// Fock-basis amplitudes c_0 .. c_{n_max}.
using StateVector = Eigen::VectorXcd;

/// Diagonal energies and the pentadiagonal (a + a^dagger)^2 of the truncated oscillator.
struct KerrOperatorSet {
    double chi = 0.0;
    /// E_n = n + 1/2 + chi n (n - 1)
    Eigen::VectorXd energies;
    /// <n|X^2|n> = 2n + 1
    Eigen::VectorXd x2_diag;
    /// <n+2|X^2|n> = sqrt((n+1)(n+2)), length n_max - 1
    Eigen::VectorXd x2_off;

    std::size_t dimension() const { return static_cast<std::size_t>(energies.size()); }
    std::size_t n_max() const { return dimension() - 1; }

    /// X^2 |psi>
    StateVector apply_x2(const StateVector& psi) const;
    /// Dense real symmetric copy of X^2.
    Eigen::MatrixXd x2_dense() const;
};

class PropagationError : public std::runtime_error {
public:
    PropagationError(const std::string& what, double drift) : std::runtime_error(what), drift_(drift) {}
    double drift() const { return drift_; }

private:
    double drift_;
};

/// Raised when the requested cutoff leaves more than 1e-12 of the state's weight behind.
class CutoffError : public std::invalid_argument {
public:
    CutoffError(const std::string& what, double tail) : std::invalid_argument(what), tail_(tail) {}
    double tail_weight() const { return tail_; }

private:
    double tail_;
};

KerrOperatorSet build_operators(double chi, const FockSpaceSpec& fock);

StateVector coherent_state_vector(cplx alpha0, const FockSpaceSpec& fock);

/// (n_plus |alpha0> + n_minus e^{i theta} |-alpha0>) normalised.
StateVector cat_state_vector(const CatSpec& cat, const FockSpaceSpec& fock);

StateVector prepare_state(const InitialState& state, const FockSpaceSpec& fock);

/// Multiplies amplitude n by exp(-i E_n t).
StateVector evolve_free(const StateVector& psi, const KerrOperatorSet& ops, double t);

/// Integrates i d|psi>/dt = H(t)|psi> over [t0, t1] with the kick term included, using
/// an integrating-factor RK4 whose diagonal part is exact. Steps are uniform and no
/// longer than max_step. Throws PropagationError if the norm drifts by more than 1e-9.
StateVector evolve_pulse_window(const StateVector& psi, const KerrOperatorSet& ops, const KickPulse& pulse,
                                double t0, double t1, double max_step = 1e-5);

/// exp(i g0 X^2 / 2) as a dense matrix.
Eigen::MatrixXcd kick_unitary_matrix(const KerrOperatorSet& ops, double g0);

StateVector impulsive_kick_unitary(const StateVector& psi, const KerrOperatorSet& ops, double g0);

enum class DisplacementForm {
    squeeze,     ///< cosh(g0) alpha + i sinh(g0) alpha*
    linearized,  ///< alpha + i g0 alpha*
    shear,       ///< alpha + i g0 (alpha + alpha*), the classical p -> p + 2 g0 q
};

/// Post-kick amplitude of a coherent component with the vacuum squeezing neglected.
/// Prints a warning to std::clog once per process if |g0| > 0.1.
cplx squeeze_kick_amplitude(cplx alpha, double g0, DisplacementForm form = DisplacementForm::squeeze);

cplx expectation_a(const StateVector& psi);
double expectation_q(const StateVector& psi);
double expectation_n(const StateVector& psi);

/// |<phi|psi>|^2
double fidelity(const StateVector& phi, const StateVector& psi);

/// <beta| a(t) |alpha> for normalised coherent states under the free Kerr Hamiltonian:
/// alpha e^{-it} exp(-(|alpha|^2 + |beta|^2)/2 + beta* alpha e^{-2 i chi t}).
cplx coherent_matrix_element(cplx beta, cplx alpha, double chi, double t);

/// <beta|alpha> for normalised coherent states.
cplx coherent_overlap(cplx beta, cplx alpha);

/// Coherent-state superposition sum_j c_j |alpha_j>, not necessarily normalised.
struct Superposition {
    std::vector<cplx> coefficients;
    std::vector<cplx> amplitudes;

    double norm_squared() const;
    /// <a(t)> / <psi|psi> under free evolution.
    cplx mean_a(double chi, double t) const;
    StateVector to_fock(const FockSpaceSpec& fock) const;
};

Superposition cat_superposition(const CatSpec& cat);

cplx analytic_mean_a_coherent(cplx alpha0, double chi, double t);

/// Both cat components and their cross terms, divided by the cat's norm squared.
cplx analytic_mean_a_cat(const CatSpec& cat, double chi, double t);

struct RevivalTimes {
    double t_rev;
    std::vector<double> fractional;  ///< t_rev / nu for each requested nu
};

RevivalTimes revival_times(double chi, const std::vector<int>& nus = {2, 4});

/// Direct Gauss sum (1/nu) sum_l exp(-2 pi i (l^2 + l (k - 1)) / nu).
cplx gauss_sum_direct(int nu, int k);

/// Closed form of the Gauss sum for odd nu; even nu throws InvalidParameter.
cplx gauss_sum_closed_form(int nu, int k);

struct RevivalDecomposition {
    int nu = 0;
    double time = 0.0;
    std::vector<cplx> coefficients;
    std::vector<cplx> amplitudes;

    Superposition superposition() const { return {coefficients, amplitudes}; }
};

/// State of |alpha0> at T_rev/nu written as sum_k C_k |alpha_k>.
RevivalDecomposition fractional_revival_decomposition(cplx alpha0, double chi, int nu);

/// l = (4 r* - 2) mod nu in [0, nu - 1]. Requires nu mod 4 = 3.
int selection_rule(int nu, int r_star);

/// Post-kick <a(t)> for a kick at tau = T_rev/nu: the fractional-revival components are
/// displaced individually and propagated with the coherent matrix element. t > tau.
cplx kicked_mean_a_superposition(cplx alpha0, double chi, double g0, int nu, double t,
                                 DisplacementForm form = DisplacementForm::squeeze);

std::vector<cplx> kicked_mean_a_superposition(cplx alpha0, double chi, double g0, int nu,
                                              const std::vector<double>& times,
                                              DisplacementForm form = DisplacementForm::squeeze);

struct EchoPrediction {
    int r_star = 0;
    int l = 0;
    double tau = 0.0;
    /// 2 r* tau for r* > 0, T_rev/2 + 2 r* tau for r* < 0
    double t_echo = 0.0;
    /// z at the requested time
    cplx z{};
    /// J_{r*}[i z(t)] <a(t - 2 r* tau)>
    cplx mean_a{};
    /// |J_{r*}[i z(t_echo)]|
    double amplitude = 0.0;
};

/// z(t) = 2 alpha0^2 g0 [exp(-2 i chi (t - tau)) - cos(chi l tau)]
cplx echo_z(double alpha0_abs, double chi, double g0, double tau, int l, double t);

/// Closed-form echo of order r* for the kick at T_rev/nu. Requires nu mod 4 = 3.
EchoPrediction kicked_echo_prediction(cplx alpha0, double chi, double g0, int nu, int r_star, double t);

/// Propagation settings shared by the trace drivers.
struct QuantumRunOptions {
    double dt_pulse = 1e-5;
    /// Apply exp(i g0 X^2/2) at tau instead of integrating through the pulse.
    bool impulsive = false;
};

/// Exact free phases outside the pulse window, evolve_pulse_window inside it.
StateVector propagate(const StateVector& psi, const KerrOperatorSet& ops, const std::optional<KickPulse>& pulse,
                      double t0, double t1, const QuantumRunOptions& options = {});

struct ExpectationTrace {
    std::vector<double> times;
    std::vector<cplx> mean_a;
    double max_norm_drift = 0.0;

    std::vector<double> mean_q() const;
};

/// Samples <a> on the grid, starting from psi at grid.t_start.
ExpectationTrace evolve_trace(const StateVector& psi, const KerrOperatorSet& ops,
                              const std::optional<KickPulse>& pulse, const TimeGrid& grid,
                              const QuantumRunOptions& options = {});

/// `n,re,im`
void write_state_csv(const std::filesystem::path& path, const StateVector& psi);

}  // namespace kerr::quantum
