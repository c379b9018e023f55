#include "kerr/classical.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <thread>

namespace kerr::classical {

namespace {

constexpr std::size_t kBlockSize = 1024;

// Dormand-Prince 5(4) tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

using Vec2 = std::array<double, 2>;

Vec2 axpy(const Vec2& y, double h, std::initializer_list<std::pair<double, const Vec2*>> terms) {
    Vec2 out = y;
    for (const auto& [coef, k] : terms) {
        out[0] += h * coef * (*k)[0];
        out[1] += h * coef * (*k)[1];
    }
    return out;
}

PhaseSpacePoint integrate_window(PhaseSpacePoint start, double chi, const KickPulse& pulse, double t0,
                                 double t1, const IntegratorSettings& s) {
    auto f = [&](double t, const Vec2& y) { return hamilton_rhs({y[0], y[1]}, t, chi, pulse); };
    Vec2 y{start.q, start.p};
    double t = t0;
    double h = std::min(s.max_step, t1 - t0);
    Vec2 k1 = f(t, y);
    while (t < t1) {
        h = std::min({h, s.max_step, t1 - t});
        if (h < s.min_step && t1 - t > s.min_step) {
            throw IntegrationError("step size underflow at t = " + std::to_string(t), t);
        }
        const Vec2 k2 = f(t + c2 * h, axpy(y, h, {{a21, &k1}}));
        const Vec2 k3 = f(t + c3 * h, axpy(y, h, {{a31, &k1}, {a32, &k2}}));
        const Vec2 k4 = f(t + c4 * h, axpy(y, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const Vec2 k5 = f(t + c5 * h, axpy(y, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const Vec2 k6 = f(t + h, axpy(y, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const Vec2 y_new = axpy(y, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
        const Vec2 k7 = f(t + h, y_new);
        double err = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
            const double scale = s.abs_tol + s.rel_tol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            err = std::max(err, std::abs(e) / scale);
        }
        if (!std::isfinite(err)) throw IntegrationError("non-finite state at t = " + std::to_string(t), t);
        if (err <= 1.0) {
            t = (t1 - t - h < 1e-15 * std::max(1.0, std::abs(t1))) ? t1 : t + h;
            y = y_new;
            k1 = k7;
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h *= factor;
    }
    return {y[0], y[1]};
}

// Neumaier-compensated running sum.
struct CompensatedSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + comp; }
};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

PhaseSpaceHistogram empty_histogram(const HistogramSpec& spec) {
    PhaseSpaceHistogram h;
    h.time = spec.time;
    for (std::size_t i = 0; i <= spec.q_bins; ++i) {
        h.q_edges.push_back(spec.q_min + (spec.q_max - spec.q_min) * static_cast<double>(i) / spec.q_bins);
    }
    for (std::size_t i = 0; i <= spec.p_bins; ++i) {
        h.p_edges.push_back(spec.p_min + (spec.p_max - spec.p_min) * static_cast<double>(i) / spec.p_bins);
    }
    h.counts.assign(spec.q_bins * spec.p_bins, 0);
    return h;
}

void bin_point(PhaseSpaceHistogram& h, const HistogramSpec& spec, PhaseSpacePoint pt) {
    const double fq = (pt.q - spec.q_min) / (spec.q_max - spec.q_min);
    const double fp = (pt.p - spec.p_min) / (spec.p_max - spec.p_min);
    if (!(fq >= 0.0 && fq < 1.0 && fp >= 0.0 && fp < 1.0)) {
        ++h.outside;
        return;
    }
    const auto iq = std::min(static_cast<std::size_t>(fq * spec.q_bins), spec.q_bins - 1);
    const auto ip = std::min(static_cast<std::size_t>(fp * spec.p_bins), spec.p_bins - 1);
    ++h.counts[iq * spec.p_bins + ip];
}

}  // namespace

PhaseSpacePoint exact_free_trajectory(PhaseSpacePoint start, double chi, double t) {
    const double angle = (1.0 + chi * start.r2()) * t;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {start.q * c + start.p * s, start.p * c - start.q * s};
}

std::array<double, 2> hamilton_rhs(PhaseSpacePoint point, double t, double chi,
                                   const std::optional<KickPulse>& pulse) {
    const double omega = 1.0 + chi * point.r2();
    const double g = pulse ? pulse_value(*pulse, t) : 0.0;
    return {point.p * omega, -point.q * omega + 2.0 * g * point.q};
}

PhaseSpacePoint apply_impulsive_kick_classical(PhaseSpacePoint point, double g0) {
    return {point.q, point.p + 2.0 * g0 * point.q};
}

PhaseSpacePoint propagate(PhaseSpacePoint start, double chi, const std::optional<KickPulse>& pulse,
                          double t0, double t1, const IntegratorSettings& settings, KickModel model) {
    if (t1 < t0) throw InvalidParameter("propagate: t1 must not precede t0");
    // a zero-area kick leaves the free flow untouched
    if (!pulse || pulse->g0 == 0.0 || t1 == t0) return exact_free_trajectory(start, chi, t1 - t0);

    if (model == KickModel::impulsive) {
        const double tau = pulse->tau;
        if (t0 < tau && tau <= t1) {
            PhaseSpacePoint at_kick = exact_free_trajectory(start, chi, tau - t0);
            at_kick = apply_impulsive_kick_classical(at_kick, pulse->g0);
            return exact_free_trajectory(at_kick, chi, t1 - tau);
        }
        return exact_free_trajectory(start, chi, t1 - t0);
    }

    const auto [w0, w1] = pulse->window();
    PhaseSpacePoint pt = start;
    double t = t0;
    if (t < w0) {
        const double next = std::min(w0, t1);
        pt = exact_free_trajectory(pt, chi, next - t);
        t = next;
    }
    if (t < w1 && t < t1) {
        const double next = std::min(w1, t1);
        pt = integrate_window(pt, chi, *pulse, t, next, settings);
        t = next;
    }
    if (t < t1) pt = exact_free_trajectory(pt, chi, t1 - t);
    return pt;
}

Trajectory integrate_trajectory(PhaseSpacePoint start, double chi, const std::optional<KickPulse>& pulse,
                                std::span<const double> times, const IntegratorSettings& settings,
                                KickModel model) {
    Trajectory out;
    if (times.empty()) return out;
    out.times.assign(times.begin(), times.end());
    out.points.reserve(times.size());
    PhaseSpacePoint pt = start;
    out.points.push_back(pt);
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) throw InvalidParameter("integrate_trajectory: times must increase");
        pt = propagate(pt, chi, pulse, times[i - 1], times[i], settings, model);
        out.points.push_back(pt);
    }
    return out;
}

Trajectory integrate_trajectory(PhaseSpacePoint start, double chi, const std::optional<KickPulse>& pulse,
                                const TimeGrid& grid, const IntegratorSettings& settings, KickModel model) {
    const auto times = grid.samples();
    return integrate_trajectory(start, chi, pulse, std::span<const double>(times), settings, model);
}

PhaseSpacePoint sample_initial_point(const CoherentSpec& spec, std::uint64_t seed, std::size_t index) {
    std::mt19937_64 gen(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index))));
    std::normal_distribution<double> normal(0.0, kCoherentSigma);
    const double dq = normal(gen);
    const double dp = normal(gen);
    return {spec.q0() + dq, spec.p0() + dp};
}

std::vector<PhaseSpacePoint> sample_initial_ensemble(const CoherentSpec& spec, const EnsembleSpec& ens) {
    std::vector<PhaseSpacePoint> out(ens.n_samples);
    for (std::size_t i = 0; i < ens.n_samples; ++i) out[i] = sample_initial_point(spec, ens.seed, i);
    return out;
}

std::uint64_t PhaseSpaceHistogram::total() const {
    std::uint64_t sum = outside;
    for (auto c : counts) sum += c;
    return sum;
}

EnsembleResult ensemble_mean_q(std::span<const PhaseSpacePoint> ensemble, double chi,
                               const std::optional<KickPulse>& pulse, const TimeGrid& grid,
                               const EnsembleOptions& options) {
    const std::vector<double> out_times = grid.samples();
    std::vector<double> all_times = out_times;
    for (const auto& snap : options.snapshots) all_times.push_back(snap.time);
    std::sort(all_times.begin(), all_times.end());
    all_times.erase(std::unique(all_times.begin(), all_times.end()), all_times.end());
    if (all_times.front() < grid.t_start) {
        throw InvalidParameter("ensemble_mean_q: snapshot time precedes grid.t_start");
    }
    // samples are given at grid.t_start
    if (all_times.front() > grid.t_start) all_times.insert(all_times.begin(), grid.t_start);

    std::vector<std::size_t> out_index(out_times.size());
    for (std::size_t i = 0; i < out_times.size(); ++i) {
        out_index[i] = static_cast<std::size_t>(
            std::lower_bound(all_times.begin(), all_times.end(), out_times[i]) - all_times.begin());
    }
    std::vector<std::size_t> snap_index(options.snapshots.size());
    for (std::size_t i = 0; i < options.snapshots.size(); ++i) {
        snap_index[i] = static_cast<std::size_t>(
            std::lower_bound(all_times.begin(), all_times.end(), options.snapshots[i].time) - all_times.begin());
    }

    const std::size_t n = ensemble.size();
    const std::size_t n_out = out_times.size();
    const std::size_t n_blocks = (n + kBlockSize - 1) / kBlockSize;

    struct BlockResult {
        std::vector<double> sum, sum_sq;
        std::vector<PhaseSpaceHistogram> hists;
    };
    std::vector<BlockResult> blocks(n_blocks);
    std::atomic<std::size_t> next_block{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::mutex failure_mutex;

    auto worker = [&] {
        std::vector<CompensatedSum> s(n_out), s2(n_out);
        for (;;) {
            const std::size_t b = next_block.fetch_add(1);
            if (b >= n_blocks || failed.load()) return;
            std::fill(s.begin(), s.end(), CompensatedSum{});
            std::fill(s2.begin(), s2.end(), CompensatedSum{});
            BlockResult br;
            for (const auto& spec : options.snapshots) br.hists.push_back(empty_histogram(spec));
            const std::size_t lo = b * kBlockSize;
            const std::size_t hi = std::min(n, lo + kBlockSize);
            try {
                for (std::size_t i = lo; i < hi; ++i) {
                    Trajectory traj;
                    try {
                        traj = integrate_trajectory(ensemble[i], chi, pulse, std::span<const double>(all_times),
                                                    options.integrator, options.kick_model);
                    } catch (const IntegrationError& e) {
                        throw IntegrationError(std::string(e.what()) + " (trajectory " + std::to_string(i) + ")",
                                               e.last_good_time(), i);
                    }
                    for (std::size_t k = 0; k < n_out; ++k) {
                        const double q = traj.points[out_index[k]].q;
                        s[k].add(q);
                        s2[k].add(q * q);
                    }
                    for (std::size_t h = 0; h < snap_index.size(); ++h) {
                        bin_point(br.hists[h], options.snapshots[h], traj.points[snap_index[h]]);
                    }
                }
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                failed = true;
                return;
            }
            br.sum.resize(n_out);
            br.sum_sq.resize(n_out);
            for (std::size_t k = 0; k < n_out; ++k) {
                br.sum[k] = s[k].value();
                br.sum_sq[k] = s2[k].value();
            }
            blocks[b] = std::move(br);
        }
    };

    const unsigned n_threads = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n_blocks)));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    EnsembleResult result;
    result.mean_q.times = out_times;
    result.mean_q.values.resize(n_out);
    result.mean_q.stderrs.resize(n_out);
    const double dn = static_cast<double>(n);
    for (std::size_t k = 0; k < n_out; ++k) {
        CompensatedSum s, s2;
        for (const auto& br : blocks) {
            s.add(br.sum[k]);
            s2.add(br.sum_sq[k]);
        }
        const double mean = s.value() / dn;
        const double var = n > 1 ? std::max(0.0, (s2.value() - dn * mean * mean) / (dn - 1.0)) : 0.0;
        result.mean_q.values[k] = mean;
        result.mean_q.stderrs[k] = std::sqrt(var / dn);
    }
    for (std::size_t h = 0; h < options.snapshots.size(); ++h) {
        PhaseSpaceHistogram merged = empty_histogram(options.snapshots[h]);
        for (const auto& br : blocks) {
            for (std::size_t c = 0; c < merged.counts.size(); ++c) merged.counts[c] += br.hists[h].counts[c];
            merged.outside += br.hists[h].outside;
        }
        result.snapshots.push_back(std::move(merged));
    }
    return result;
}

double phase_space_density_analytic(double phi, double r, double t, double q0, double chi) {
    if (!(q0 > 0.0)) throw InvalidParameter("phase_space_density_analytic: requires q0 > 0 (p0 = 0)");
    const double s2 = kCoherentSigma * kCoherentSigma;
    const double omega = 1.0 + chi * r * r;
    // exp(-(q0^2 + r^2)/2s^2 + q0 r cos(.)/s^2) rewritten to avoid overflow
    const double exponent = -((q0 - r) * (q0 - r) + 2.0 * q0 * r * (1.0 - std::cos(phi - omega * t))) / (2.0 * s2);
    return std::exp(exponent) / (2.0 * std::numbers::pi * s2);
}

double filament_radius(int k, double phi, double t, double chi) {
    const double x = (2.0 * std::numbers::pi * k + phi) / t - 1.0;
    if (!(x > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return std::sqrt(x / chi);
}

double filament_width(int k, double phi, double t, double q0, double chi) {
    const double arg = 2.0 * std::numbers::pi * k + phi - t;
    return kCoherentSigma /
           (2.0 * std::sqrt(q0) * std::pow(chi, 0.25) * std::pow(t, 0.25) * std::pow(arg, 0.75));
}

FilamentApproximation filament_approximation(double phi, double r, double t, double q0, double chi) {
    if (!(t > 0.0)) throw InvalidParameter("filament_approximation: t must be > 0");
    if (!(chi > 0.0)) throw InvalidParameter("filament_approximation: chi must be > 0");
    const double two_pi = 2.0 * std::numbers::pi;
    phi = std::fmod(phi, two_pi);
    if (phi < 0.0) phi += two_pi;
    const double s2 = kCoherentSigma * kCoherentSigma;
    const double r_lo = std::max(0.0, q0 - 12.0 * kCoherentSigma);
    const double r_hi = q0 + 12.0 * kCoherentSigma;
    // (2 pi k + phi) = t (1 + chi r_k^2) fixes the turns inside [r_lo, r_hi]
    const int k_lo = std::max(0, static_cast<int>(std::floor((t * (1.0 + chi * r_lo * r_lo) - phi) / two_pi)));
    const int k_hi = static_cast<int>(std::ceil((t * (1.0 + chi * r_hi * r_hi) - phi) / two_pi));

    FilamentApproximation out;
    double sum = 0.0;
    for (int k = k_lo; k <= k_hi; ++k) {
        const double rk = filament_radius(k, phi, t, chi);
        if (!std::isfinite(rk) || rk < r_lo || rk > r_hi) continue;
        const double sk = filament_width(k, phi, t, q0, chi);
        out.k.push_back(k);
        out.r_k.push_back(rk);
        out.sigma_k.push_back(sk);
        sum += std::exp(-(r - rk) * (r - rk) / (2.0 * sk * sk));
    }
    out.value = std::exp(-(r - q0) * (r - q0) / (2.0 * s2)) / (2.0 * std::numbers::pi * s2) * sum;
    return out;
}

FreeDecayValue analytic_mean_q_free(double t, double q0, double chi, double sigma) {
    const double s2 = sigma * sigma;
    const double value = q0 * std::exp(-2.0 * q0 * q0 * s2 * chi * chi * t * t) * std::cos((1.0 + chi * q0 * q0) * t);
    const bool extrapolated = 4.0 * s2 * s2 * chi * chi * t * t > 0.1;
    return {value, extrapolated};
}

double classical_echo_series(double t, double q0, double chi, double g0, double tau, double sigma,
                             int n_terms, const QuadratureSpec& quadrature) {
    if (!(t > tau)) throw InvalidParameter("classical_echo_series: requires t > tau");
    if (n_terms < 1) throw InvalidParameter("classical_echo_series: n_terms must be >= 1");
    const double s2 = sigma * sigma;
    const double since_kick = t - tau;
    const double r_lo = std::max(0.0, q0 - 8.0 * sigma);
    const double r_hi = q0 + 8.0 * sigma;
    double total = 0.0;
    for (int n = 1; n <= n_terms; ++n) {
        auto integrand = [&](double r) {
            const double omega = 1.0 + chi * r * r;
            const double x = q0 * r / s2;
            // exp(-(q0^2+r^2)/2s^2) I(x) = exp(-(q0-r)^2/2s^2) e^{-x} I(x)
            const double radial = std::exp(-(q0 - r) * (q0 - r) / (2.0 * s2)) * scaled_bessel_i(2 * n - 1, x);
            const double phase = omega * (since_kick - (2.0 * n - 1.0) * tau);
            return r * r * radial * bessel_j(n, 2.0 * chi * g0 * r * r * since_kick) * std::cos(phase);
        };
        total += integrate_adaptive(integrand, r_lo, r_hi, quadrature).value;
    }
    return total / s2;
}

double first_echo_amplitude(double q0, double chi, double g0, double tau) {
    return bessel_j(1, 2.0 * chi * tau * g0 * q0 * q0);
}

void write_histogram_csv(const std::filesystem::path& path, const PhaseSpaceHistogram& hist) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# time=" << format_number(hist.time) << ";q_edges=";
    for (std::size_t i = 0; i < hist.q_edges.size(); ++i) out << (i ? " " : "") << format_number(hist.q_edges[i]);
    out << ";p_edges=";
    for (std::size_t i = 0; i < hist.p_edges.size(); ++i) out << (i ? " " : "") << format_number(hist.p_edges[i]);
    out << ";outside=" << hist.outside << "\n";
    for (std::size_t iq = 0; iq < hist.q_bins(); ++iq) {
        for (std::size_t ip = 0; ip < hist.p_bins(); ++ip) {
            out << (ip ? "," : "") << hist.counts[iq * hist.p_bins() + ip];
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace kerr::classical
