#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace kerr {

using cplx = std::complex<double>;

/// Thrown for parameters outside an operation's domain.
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dimensionless oscillator constants. Energy is in units of hbar*omega, time in 1/omega.
struct OscillatorParams {
    double chi = 1.0;
    double gamma = 0.0;
    /// hbar*omega/(k_B T); empty means zero temperature.
    std::optional<double> epsilon;

    bool operator==(const OscillatorParams&) const = default;
};

enum class PulseShape { gaussian, square };

/// Parametric kick g(t). For the Gaussian shape sigma_g is the standard deviation;
/// for the square shape it is the full width. Both enclose the area g0.
struct KickPulse {
    double g0 = 0.0;
    double tau = 0.5;
    double sigma_g = 1e-3;
    PulseShape shape = PulseShape::gaussian;

    /// Support of the pulse used by the integrators: tau +- 8 sigma_g (Gaussian)
    /// or tau +- sigma_g/2 (square).
    std::pair<double, double> window() const;

    bool operator==(const KickPulse&) const = default;
};

struct CoherentSpec {
    cplx alpha0{0.0, 0.0};

    double q0() const { return std::sqrt(2.0) * alpha0.real(); }
    double p0() const { return std::sqrt(2.0) * alpha0.imag(); }

    bool operator==(const CoherentSpec&) const = default;
};

/// n_plus |alpha0> + n_minus e^{i theta} |-alpha0>, normalised by norm_squared().
struct CatSpec {
    cplx alpha0{0.0, 0.0};
    double n_plus = 1.0;
    double n_minus = 0.0;
    double theta = 0.0;

    double norm_squared() const;

    bool operator==(const CatSpec&) const = default;
};

using InitialState = std::variant<CoherentSpec, CatSpec>;

cplx initial_alpha(const InitialState& state);

struct TimeGrid {
    double t_start = 0.0;
    double t_end = 1.0;
    double dt_out = 1e-3;

    /// Sample times t_start, t_start + dt_out, ... up to and including t_end
    /// (the last sample is clamped to t_end).
    std::vector<double> samples() const;

    bool operator==(const TimeGrid&) const = default;
};

struct EnsembleSpec {
    std::size_t n_samples = 200000;
    std::uint64_t seed = 0;

    bool operator==(const EnsembleSpec&) const = default;
};

struct FockSpaceSpec {
    std::size_t n_max = 0;

    std::size_t dimension() const { return n_max + 1; }

    bool operator==(const FockSpaceSpec&) const = default;
};

/// Integrator step limits shared by the classical, quantum and density-matrix engines.
struct StepSettings {
    double dt_pulse = 1e-5;
    double dt_free = 1e-4;

    bool operator==(const StepSettings&) const = default;
};

struct SweepSpec {
    std::vector<double> theta_values;
    std::vector<double> n_plus_values;

    bool operator==(const SweepSpec&) const = default;
};

struct RevivalSpec {
    std::vector<int> nu_values{3, 5, 7};

    bool operator==(const RevivalSpec&) const = default;
};

/// Fully resolved scenario as produced by validate_config.
struct Scenario {
    OscillatorParams oscillator;
    std::optional<KickPulse> pulse;
    InitialState state = CoherentSpec{};
    TimeGrid grid;
    EnsembleSpec ensemble;
    FockSpaceSpec fock;
    StepSettings steps;
    SweepSpec sweep;
    RevivalSpec revival;

    bool operator==(const Scenario&) const = default;
};

struct DimensionlessParams {
    double chi;
    double g0;
};

/// chi = K/(hbar omega), g0 = (area of Gamma)/(hbar omega^2).
DimensionlessParams nondimensionalize(double kerr_constant, double omega, double gamma_area,
                                      double hbar);

/// Value of the kick envelope g(t).
double pulse_value(const KickPulse& pulse, double t);

/// ceil(|alpha|^2 + 8|alpha| + 10), grown until the Poisson tail beyond it is below
/// 1e-12, then rounded up to a power of two.
std::size_t default_cutoff(double alpha_abs);

/// Poisson weight of a coherent state above n_max.
double coherent_tail_weight(double alpha_abs, std::size_t n_max);

inline constexpr double kTailTolerance = 1e-12;
inline constexpr double kDefaultSigmaG = 1e-3;
inline constexpr std::size_t kDefaultSamples = 200000;

}  // namespace kerr
