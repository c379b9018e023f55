#pragma once

#include "kerr/model.hpp"
#include "kerr/time_series.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kerr::analysis {

enum class EchoKind { classical_echo, quantum_echo, half_revival, quarter_revival };

std::string to_string(EchoKind kind);
EchoKind echo_kind_from_string(const std::string& name);

/// Thrown when the series is sampled too coarsely for the carrier.
class UndersampledError : public std::invalid_argument {
public:
    UndersampledError(const std::string& what, double required_dt)
        : std::invalid_argument(what), required_dt_(required_dt) {}
    double required_dt() const { return required_dt_; }

private:
    double required_dt_;
};

/// Magnitude envelope by local quadrature demodulation: over one carrier period around
/// each node the signal is fitted as cos and sin of the carrier with amplitudes cubic
/// in time, and the nodes (eight per period) are joined by a modified Akima cubic. The
/// result is raised to |x| wherever the signal pokes above. `carrier` is the angular
/// carrier frequency; at least 8 samples per carrier period are required.
TimeSeries envelope(const TimeSeries& series, double carrier);

/// Angular carrier frequency 1 + chi q0^2 of the oscillation of <q>.
double carrier_frequency(double chi, double q0);

struct PredictedEvent {
    EchoKind kind = EchoKind::classical_echo;
    int order = 1;
    double time = 0.0;
    double half_width = 0.0;
    /// Model amplitude in the units of the series, if one exists.
    std::optional<double> prediction;
};

/// tau/2 for echoes and tau/4 for revivals.
double default_half_width(EchoKind kind, double tau);

struct EchoEvent {
    EchoKind kind = EchoKind::classical_echo;
    int order = 1;
    double t_predicted = 0.0;
    double t_detected = 0.0;
    /// Peak envelope inside the window minus the baseline, clipped at zero.
    double amplitude = 0.0;
    double baseline = 0.0;
    /// Median absolute deviation of the envelope in the buffers.
    double noise = 0.0;
    double threshold = 0.0;
    bool significant = false;
    std::optional<double> prediction;
};

struct DetectionSettings {
    double noise_multiplier = 5.0;
    /// The noise floor is never taken below this fraction of max |series|.
    double relative_floor = 0.01;
    /// Keeps round-off in a signal that vanishes by symmetry from registering as an echo.
    double absolute_floor = 1e-9;
};

/// Measures every window whether or not the peak clears the threshold. The flanking
/// buffers are [t - 2w, t - w] and [t + w, t + 2w] for half width w. Overlapping windows
/// throw InvalidParameter.
std::vector<EchoEvent> measure_windows(const TimeSeries& env, const std::vector<PredictedEvent>& predicted,
                                       double series_max, const DetectionSettings& settings = {});

/// Windowed detection on the envelope of `series`; only significant events are returned.
std::vector<EchoEvent> detect_echoes(const TimeSeries& series, double carrier,
                                     const std::vector<PredictedEvent>& predicted,
                                     const DetectionSettings& settings = {});

struct ComparisonEntry {
    EchoKind kind;
    int order;
    double measured;
    double predicted;
    /// measured / predicted
    double ratio;
    /// (measured - predicted) / predicted; 0 with exact_match when both are zero
    double deviation;
    bool exact_match;
};

struct ComparisonReport {
    std::vector<ComparisonEntry> entries;
    double max_abs_deviation = 0.0;
    double mean_abs_deviation = 0.0;
};

/// Pairs each event with its model amplitude. Events without a prediction are skipped.
ComparisonReport compare_to_prediction(const std::vector<EchoEvent>& events);

/// Same, with the model amplitudes given separately (matched by position; the kinds of
/// `models` must agree with the events).
ComparisonReport compare_to_prediction(const std::vector<EchoEvent>& events,
                                       const std::vector<PredictedEvent>& models);

enum class SweepEngine { pulsed, impulsive };

struct SweepGrid {
    std::vector<double> theta_values;
    /// Weights N+^2 of the |alpha0> component; N-^2 = 1 - N+^2.
    std::vector<double> weight_values;
    /// Rows follow weight_values, columns theta_values.
    std::vector<std::vector<double>> classical;
    std::vector<std::vector<double>> quantum;
    std::vector<std::vector<bool>> classical_detected;
    std::vector<std::vector<bool>> quantum_detected;
};

/// Kicked Fock propagation of the cat for every (N+^2, theta) cell; measures the first
/// classical echo at 2 tau and the first quantum echo at T_rev/4 - 2 tau.
SweepGrid sweep_cat_echo_amplitudes(const Scenario& base, const std::vector<double>& theta_values,
                                    const std::vector<double>& weight_values,
                                    SweepEngine engine = SweepEngine::pulsed, unsigned threads = 1,
                                    const DetectionSettings& settings = {});

/// One matrix per file: a header row of theta values, then one row per weight.
void write_sweep_csv(const std::filesystem::path& path, const SweepGrid& grid, bool quantum_matrix);

}  // namespace kerr::analysis
