#include "kerr/analysis.hpp"
#include "kerr/quantum.hpp"

#include <boost/math/interpolators/makima.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <thread>

namespace kerr::analysis {

namespace {

double median(std::vector<double> v) {
    if (v.empty()) throw InvalidParameter("median of an empty range");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

std::size_t lower_index(const std::vector<double>& times, double t) {
    return static_cast<std::size_t>(std::lower_bound(times.begin(), times.end(), t) - times.begin());
}

}  // namespace

std::string to_string(EchoKind kind) {
    switch (kind) {
        case EchoKind::classical_echo: return "classical-echo";
        case EchoKind::quantum_echo: return "quantum-echo";
        case EchoKind::half_revival: return "half-revival";
        case EchoKind::quarter_revival: return "quarter-revival";
    }
    return "unknown";
}

EchoKind echo_kind_from_string(const std::string& name) {
    for (EchoKind k : {EchoKind::classical_echo, EchoKind::quantum_echo, EchoKind::half_revival,
                       EchoKind::quarter_revival}) {
        if (to_string(k) == name) return k;
    }
    throw InvalidParameter("unknown echo kind '" + name + "'");
}

double carrier_frequency(double chi, double q0) { return 1.0 + chi * q0 * q0; }

TimeSeries envelope(const TimeSeries& series, double carrier) {
    series.check();
    if (!(carrier > 0.0)) throw InvalidParameter("envelope: carrier frequency must be > 0");
    const std::size_t n = series.size();
    const double required = 2.0 * std::numbers::pi / (8.0 * carrier);
    for (std::size_t i = 1; i < n; ++i) {
        if (series.times[i] - series.times[i - 1] > required * (1.0 + 1e-9)) {
            throw UndersampledError("envelope: sampling interval " +
                                        format_number(series.times[i] - series.times[i - 1]) +
                                        " is too coarse for the carrier; dt_out must be <= " + format_number(required),
                                    required);
        }
    }
    TimeSeries env;
    env.times = series.times;
    env.values.assign(n, 0.0);
    if (n == 0) return env;

    if (n < 8) {
        for (std::size_t i = 0; i < n; ++i) env.values[i] = std::abs(series.values[i]);
        return env;
    }
    const double period = 2.0 * std::numbers::pi / carrier;
    const auto& ts = series.times;

    // quadrature fit over one period: amplitude cubic in time on both cos and sin,
    // which also absorbs a slow drift of the phase away from the carrier
    auto demodulate = [&](std::size_t centre) {
        const double tc = ts[centre];
        double lo_t = tc - 0.5 * period, hi_t = tc + 0.5 * period;
        if (lo_t < ts.front()) hi_t = std::min(ts.back(), ts.front() + period), lo_t = ts.front();
        if (hi_t > ts.back()) lo_t = std::max(ts.front(), ts.back() - period), hi_t = ts.back();
        std::size_t first = lower_index(ts, lo_t);
        std::size_t last = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), hi_t) - ts.begin());
        while (last - first < 8 && (first > 0 || last < n)) {
            if (first > 0) --first;
            if (last < n) ++last;
        }
        const auto rows = static_cast<Eigen::Index>(last - first);
        Eigen::MatrixXd basis(rows, 8);
        Eigen::VectorXd rhs(rows);
        for (std::size_t j = first; j < last; ++j) {
            const double u = (ts[j] - tc) / period;
            const double c = std::cos(carrier * (ts[j] - tc)), sn = std::sin(carrier * (ts[j] - tc));
            basis.row(static_cast<Eigen::Index>(j - first)) << c, sn, u * c, u * sn, u * u * c, u * u * sn,
                u * u * u * c, u * u * u * sn;
            rhs(static_cast<Eigen::Index>(j - first)) = series.values[j];
        }
        const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(rhs);
        return std::hypot(coef(0), coef(1));
    };

    std::vector<double> node_t, node_v;
    for (std::size_t i = 0; i < n;) {
        node_t.push_back(ts[i]);
        node_v.push_back(demodulate(i));
        const std::size_t next = lower_index(ts, ts[i] + period / 8.0);
        i = std::max(i + 1, next);
    }
    if (node_t.back() != ts[n - 1]) {
        node_t.push_back(ts[n - 1]);
        node_v.push_back(demodulate(n - 1));
    }
    if (node_t.size() >= 4) {
        using boost::math::interpolators::makima;
        auto through = makima<std::vector<double>>(std::move(node_t), std::move(node_v));
        for (std::size_t i = 0; i < n; ++i) env.values[i] = through(series.times[i]);
    } else {
        for (std::size_t i = 0; i < n; ++i) env.values[i] = demodulate(i);
    }
    for (std::size_t i = 0; i < n; ++i) env.values[i] = std::max(env.values[i], std::abs(series.values[i]));
    return env;
}

double default_half_width(EchoKind kind, double tau) {
    const bool revival = kind == EchoKind::half_revival || kind == EchoKind::quarter_revival;
    return revival ? 0.25 * tau : 0.5 * tau;
}

std::vector<EchoEvent> measure_windows(const TimeSeries& env, const std::vector<PredictedEvent>& predicted,
                                       double series_max, const DetectionSettings& settings) {
    for (const auto& p : predicted) {
        if (!(p.half_width > 0.0)) throw InvalidParameter("detect_echoes: window half-width must be > 0");
    }
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        for (std::size_t j = i + 1; j < predicted.size(); ++j) {
            const auto& a = predicted[i];
            const auto& b = predicted[j];
            if (std::abs(a.time - b.time) < a.half_width + b.half_width) {
                throw InvalidParameter("detect_echoes: windows for " + to_string(a.kind) + " at " +
                                       format_number(a.time) + " and " + to_string(b.kind) + " at " +
                                       format_number(b.time) + " overlap");
            }
        }
    }
    const auto& times = env.times;
    std::vector<EchoEvent> out;
    for (const auto& p : predicted) {
        const double w = p.half_width;
        EchoEvent ev;
        ev.kind = p.kind;
        ev.order = p.order;
        ev.t_predicted = p.time;
        ev.prediction = p.prediction;

        const std::size_t lo = lower_index(times, p.time - w);
        const std::size_t hi = lower_index(times, std::nextafter(p.time + w, INFINITY));
        if (lo >= hi) {
            throw InvalidParameter("detect_echoes: window at " + format_number(p.time) + " lies outside the series");
        }
        std::vector<double> buffer;
        for (std::size_t i = lower_index(times, p.time - 2.0 * w); i < lo; ++i) buffer.push_back(env.values[i]);
        for (std::size_t i = hi; i < times.size() && times[i] <= p.time + 2.0 * w; ++i) buffer.push_back(env.values[i]);
        if (buffer.empty()) {
            throw InvalidParameter("detect_echoes: no buffer samples around " + format_number(p.time));
        }
        ev.baseline = median(buffer);
        std::vector<double> dev;
        dev.reserve(buffer.size());
        for (double b : buffer) dev.push_back(std::abs(b - ev.baseline));
        ev.noise = median(dev);

        std::size_t best = lo;
        for (std::size_t i = lo; i < hi; ++i) {
            if (env.values[i] > env.values[best]) best = i;
        }
        ev.t_detected = times[best];
        ev.amplitude = std::max(0.0, env.values[best] - ev.baseline);
        ev.threshold = settings.noise_multiplier *
                       std::max({ev.noise, settings.relative_floor * series_max, settings.absolute_floor});
        ev.significant = ev.amplitude > ev.threshold;
        out.push_back(ev);
    }
    return out;
}

std::vector<EchoEvent> detect_echoes(const TimeSeries& series, double carrier,
                                     const std::vector<PredictedEvent>& predicted,
                                     const DetectionSettings& settings) {
    const TimeSeries env = envelope(series, carrier);
    std::vector<EchoEvent> all = measure_windows(env, predicted, series.max_abs(), settings);
    std::vector<EchoEvent> out;
    for (auto& ev : all) {
        if (ev.significant) out.push_back(ev);
    }
    return out;
}

ComparisonReport compare_to_prediction(const std::vector<EchoEvent>& events) {
    ComparisonReport report;
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& ev : events) {
        if (!ev.prediction) continue;
        ComparisonEntry e{ev.kind, ev.order, ev.amplitude, *ev.prediction, 0.0, 0.0, false};
        if (e.predicted == 0.0 && e.measured == 0.0) {
            e.ratio = 1.0;
            e.exact_match = true;
        } else if (e.predicted == 0.0) {
            e.ratio = std::numeric_limits<double>::infinity();
            e.deviation = std::numeric_limits<double>::infinity();
        } else {
            e.ratio = e.measured / e.predicted;
            e.deviation = e.ratio - 1.0;
        }
        report.max_abs_deviation = std::max(report.max_abs_deviation, std::abs(e.deviation));
        sum += std::abs(e.deviation);
        ++counted;
        report.entries.push_back(e);
    }
    report.mean_abs_deviation = counted ? sum / static_cast<double>(counted) : 0.0;
    return report;
}

ComparisonReport compare_to_prediction(const std::vector<EchoEvent>& events,
                                       const std::vector<PredictedEvent>& models) {
    if (events.size() != models.size()) {
        throw InvalidParameter("compare_to_prediction: event and model counts differ");
    }
    std::vector<EchoEvent> paired = events;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].kind != models[i].kind || events[i].order != models[i].order) {
            throw InvalidParameter("compare_to_prediction: event " + std::to_string(i) + " is " +
                                   to_string(events[i].kind) + " but the model is " + to_string(models[i].kind));
        }
        paired[i].prediction = models[i].prediction;
    }
    return compare_to_prediction(paired);
}

SweepGrid sweep_cat_echo_amplitudes(const Scenario& base, const std::vector<double>& theta_values,
                                    const std::vector<double>& weight_values, SweepEngine engine, unsigned threads,
                                    const DetectionSettings& settings) {
    if (!base.pulse) throw InvalidParameter("sweep_cat_echo_amplitudes: the base scenario needs a pulse");
    if (!(base.oscillator.chi > 0.0)) throw InvalidParameter("sweep_cat_echo_amplitudes: chi must be > 0");
    for (double w : weight_values) {
        if (w < 0.0 || w > 1.0) throw InvalidParameter("sweep_cat_echo_amplitudes: weights must lie in [0, 1]");
    }
    const KickPulse pulse = *base.pulse;
    const double chi = base.oscillator.chi;
    const cplx alpha0 = initial_alpha(base.state);
    const double q0 = std::sqrt(2.0) * std::abs(alpha0);
    const double tau = pulse.tau;
    const double t_quantum = std::numbers::pi / (2.0 * chi) - 2.0 * tau;
    const std::vector<PredictedEvent> windows{
        {EchoKind::classical_echo, 1, 2.0 * tau, default_half_width(EchoKind::classical_echo, tau), std::nullopt},
        {EchoKind::quantum_echo, 1, t_quantum, default_half_width(EchoKind::quantum_echo, tau), std::nullopt},
    };
    TimeGrid grid = base.grid;
    grid.t_start = 0.0;
    grid.t_end = std::max(grid.t_end, t_quantum + 2.5 * tau);

    const quantum::KerrOperatorSet ops = quantum::build_operators(chi, base.fock);
    quantum::QuantumRunOptions run;
    run.dt_pulse = base.steps.dt_pulse;
    run.impulsive = engine == SweepEngine::impulsive;

    SweepGrid out;
    out.theta_values = theta_values;
    out.weight_values = weight_values;
    const std::size_t rows = weight_values.size();
    const std::size_t cols = theta_values.size();
    out.classical.assign(rows, std::vector<double>(cols, 0.0));
    out.quantum.assign(rows, std::vector<double>(cols, 0.0));
    out.classical_detected.assign(rows, std::vector<bool>(cols, false));
    out.quantum_detected.assign(rows, std::vector<bool>(cols, false));
    if (rows * cols == 0) return out;

    std::atomic<std::size_t> next{0};
    std::mutex guard;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            const std::size_t cell = next.fetch_add(1);
            if (cell >= rows * cols) return;
            const std::size_t r = cell / cols;
            const std::size_t c = cell % cols;
            try {
                CatSpec cat{alpha0, std::sqrt(weight_values[r]), std::sqrt(1.0 - weight_values[r]), theta_values[c]};
                const quantum::StateVector psi = quantum::cat_state_vector(cat, base.fock);
                const quantum::ExpectationTrace trace = quantum::evolve_trace(psi, ops, pulse, grid, run);
                TimeSeries series{trace.times, trace.mean_q(), {}};
                const TimeSeries env = envelope(series, carrier_frequency(chi, q0));
                const auto events = measure_windows(env, windows, series.max_abs(), settings);
                std::lock_guard lock(guard);
                out.classical[r][c] = events[0].amplitude;
                out.classical_detected[r][c] = events[0].significant;
                out.quantum[r][c] = events[1].amplitude;
                out.quantum_detected[r][c] = events[1].significant;
            } catch (const std::exception& e) {
                std::lock_guard lock(guard);
                if (!failure) {
                    failure = std::make_exception_ptr(std::runtime_error(
                        "sweep cell (n_plus^2 = " + format_number(weight_values[r]) +
                        ", theta = " + format_number(theta_values[c]) + "): " + e.what()));
                }
                return;
            }
        }
    };
    const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(rows * cols)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return out;
}

void write_sweep_csv(const std::filesystem::path& path, const SweepGrid& grid, bool quantum_matrix) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "n_plus_sq\\theta";
    for (double th : grid.theta_values) out << "," << format_number(th);
    out << "\n";
    const auto& m = quantum_matrix ? grid.quantum : grid.classical;
    for (std::size_t r = 0; r < grid.weight_values.size(); ++r) {
        out << format_number(grid.weight_values[r]);
        for (double v : m[r]) out << "," << format_number(v);
        out << "\n";
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace kerr::analysis
