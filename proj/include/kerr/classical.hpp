#pragma once

#include "kerr/model.hpp"
#include "kerr/special.hpp"
#include "kerr/time_series.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace kerr::classical {

/// Width of the Gaussian phase-space blob of a coherent state.
inline const double kCoherentSigma = 1.0 / std::sqrt(2.0);

struct PhaseSpacePoint {
    double q = 0.0;
    double p = 0.0;

    double r2() const { return q * q + p * p; }
    double r() const { return std::sqrt(r2()); }
    /// Polar angle increasing from +q toward -p, so that (q, p) = (r cos phi, -r sin phi).
    double phi() const { return std::atan2(-p, q); }

    bool operator==(const PhaseSpacePoint&) const = default;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<PhaseSpacePoint> points;
};

class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double last_good_time,
                     std::optional<std::size_t> trajectory = std::nullopt)
        : std::runtime_error(what), last_good_time_(last_good_time), trajectory_(trajectory) {}

    double last_good_time() const { return last_good_time_; }
    std::optional<std::size_t> trajectory_index() const { return trajectory_; }

private:
    double last_good_time_;
    std::optional<std::size_t> trajectory_;
};

struct IntegratorSettings {
    double max_step = 1e-5;
    double rel_tol = 1e-12;
    double abs_tol = 1e-13;
    double min_step = 1e-15;
};

enum class KickModel {
    pulsed,     ///< integrate Hamilton's equations through g(t)
    impulsive,  ///< exact free flow plus p -> p + 2 g0 q at tau
};

/// Clockwise rotation by Omega t with Omega = 1 + chi r^2.
PhaseSpacePoint exact_free_trajectory(PhaseSpacePoint start, double chi, double t);

/// (dq/dt, dp/dt) of the kicked Kerr oscillator; a missing pulse means g = 0.
std::array<double, 2> hamilton_rhs(PhaseSpacePoint point, double t, double chi,
                                   const std::optional<KickPulse>& pulse);

/// (q, p) -> (q, p + 2 g0 q).
PhaseSpacePoint apply_impulsive_kick_classical(PhaseSpacePoint point, double g0);

/// Propagates from t0 to t1 (t1 >= t0). Free stretches use the exact rotation; only the
/// pulse window is integrated, with adaptive Dormand-Prince 5(4) steps capped at max_step.
PhaseSpacePoint propagate(PhaseSpacePoint start, double chi, const std::optional<KickPulse>& pulse,
                          double t0, double t1, const IntegratorSettings& settings = {},
                          KickModel model = KickModel::pulsed);

/// Samples the trajectory at the given increasing times, starting from `start` at times[0].
Trajectory integrate_trajectory(PhaseSpacePoint start, double chi, const std::optional<KickPulse>& pulse,
                                std::span<const double> times, const IntegratorSettings& settings = {},
                                KickModel model = KickModel::pulsed);

Trajectory integrate_trajectory(PhaseSpacePoint start, double chi, const std::optional<KickPulse>& pulse,
                                const TimeGrid& grid, const IntegratorSettings& settings = {},
                                KickModel model = KickModel::pulsed);

/// Draw `index` of the stream seeded by `seed`. Independent of every other index.
PhaseSpacePoint sample_initial_point(const CoherentSpec& spec, std::uint64_t seed, std::size_t index);

/// i.i.d. Gaussian samples around (q0, p0) with sigma = 1/sqrt(2) per axis.
std::vector<PhaseSpacePoint> sample_initial_ensemble(const CoherentSpec& spec, const EnsembleSpec& ens);

struct HistogramSpec {
    double time = 0.0;
    double q_min = -10.0, q_max = 10.0;
    double p_min = -10.0, p_max = 10.0;
    std::size_t q_bins = 100, p_bins = 100;
};

struct PhaseSpaceHistogram {
    double time = 0.0;
    std::vector<double> q_edges;
    std::vector<double> p_edges;
    /// Row-major: counts[iq * p_bins + ip].
    std::vector<std::uint64_t> counts;
    /// Samples falling outside the grid.
    std::uint64_t outside = 0;

    std::size_t q_bins() const { return q_edges.size() - 1; }
    std::size_t p_bins() const { return p_edges.size() - 1; }
    std::uint64_t total() const;
};

struct EnsembleOptions {
    std::vector<HistogramSpec> snapshots;
    unsigned threads = 1;
    IntegratorSettings integrator;
    KickModel kick_model = KickModel::pulsed;
};

struct EnsembleResult {
    /// Mean of q per sample time; stderrs hold sample-std/sqrt(N).
    TimeSeries mean_q;
    std::vector<PhaseSpaceHistogram> snapshots;
};

/// Propagates every sample and reduces <q(t)>. Trajectories are processed in fixed-size
/// blocks whose partial sums are combined in block order, so the result does not depend
/// on the thread count.
EnsembleResult ensemble_mean_q(std::span<const PhaseSpacePoint> ensemble, double chi,
                               const std::optional<KickPulse>& pulse, const TimeGrid& grid,
                               const EnsembleOptions& options = {});

/// Normalised (q, p) density of the freely evolving Gaussian ensemble started at (q0, 0).
double phase_space_density_analytic(double phi, double r, double t, double q0, double chi);

struct FilamentApproximation {
    double value = 0.0;
    std::vector<int> k;
    std::vector<double> r_k;
    std::vector<double> sigma_k;
};

/// Centre r_k(phi) of the k-th spiral turn; NaN when (2 pi k + phi)/t <= 1.
double filament_radius(int k, double phi, double t, double chi);
/// Radial width sigma_k(phi) of the k-th spiral turn.
double filament_width(int k, double phi, double t, double q0, double chi);

/// Sum of Gaussian rings approximating the filamented density at late times. Lists the
/// contributing turns (those with r_k within 12 sigma of q0).
FilamentApproximation filament_approximation(double phi, double r, double t, double q0, double chi);

struct FreeDecayValue {
    double value;
    /// True outside 4 sigma^4 chi^2 t^2 < 0.1, where the expansion is not trustworthy.
    bool extrapolated;
};

/// q0 exp(-2 q0^2 sigma^2 chi^2 t^2) cos[(1 + chi q0^2) t].
FreeDecayValue analytic_mean_q_free(double t, double q0, double chi, double sigma = kCoherentSigma);

/// Post-kick echo sum: Re of (1/sigma^2) sum_{n=1}^{N} int I_{2n-1}(q0 r/sigma^2)
/// J_n(2 chi g0 r^2 s) exp(-(q0^2+r^2)/2sigma^2) exp[i Omega (s - (2n-1) tau)] r^2 dr with
/// s = t - tau the time since the kick. Radial range [max(0, q0-8 sigma), q0+8 sigma].
double classical_echo_series(double t, double q0, double chi, double g0, double tau,
                             double sigma = kCoherentSigma, int n_terms = 8,
                             const QuadratureSpec& quadrature = {});

/// J_1(2 chi tau g0 q0^2), the first-echo amplitude relative to q0.
double first_echo_amplitude(double q0, double chi, double g0, double tau);

/// One metadata line (time and bin edges) followed by the count grid, one q bin per row.
void write_histogram_csv(const std::filesystem::path& path, const PhaseSpaceHistogram& hist);

}  // namespace kerr::classical
