#include "kerr/model.hpp"

#include <cmath>
#include <numbers>

namespace kerr {

std::pair<double, double> KickPulse::window() const {
    if (shape == PulseShape::square) {
        return {tau - 0.5 * sigma_g, tau + 0.5 * sigma_g};
    }
    return {tau - 8.0 * sigma_g, tau + 8.0 * sigma_g};
}

double CatSpec::norm_squared() const {
    const double overlap = std::exp(-2.0 * std::norm(alpha0));
    return n_plus * n_plus + n_minus * n_minus + 2.0 * n_plus * n_minus * overlap * std::cos(theta);
}

cplx initial_alpha(const InitialState& state) {
    return std::visit([](const auto& s) { return s.alpha0; }, state);
}

std::vector<double> TimeGrid::samples() const {
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::ceil((t_end - t_start) / dt_out - 1e-9));
    out.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        out.push_back(std::min(t_start + static_cast<double>(i) * dt_out, t_end));
    }
    if (out.size() >= 2 && out[out.size() - 1] <= out[out.size() - 2]) out.pop_back();
    return out;
}

DimensionlessParams nondimensionalize(double kerr_constant, double omega, double gamma_area,
                                      double hbar) {
    if (!(omega > 0.0)) throw InvalidParameter("nondimensionalize: omega must be positive");
    if (!(hbar > 0.0)) throw InvalidParameter("nondimensionalize: hbar must be positive");
    const double energy = hbar * omega;
    return {kerr_constant / energy, gamma_area / (energy * omega)};
}

double pulse_value(const KickPulse& pulse, double t) {
    if (pulse.shape == PulseShape::square) {
        const auto [lo, hi] = pulse.window();
        return (t >= lo && t <= hi) ? pulse.g0 / pulse.sigma_g : 0.0;
    }
    const double x = (t - pulse.tau) / pulse.sigma_g;
    return pulse.g0 / (std::sqrt(2.0 * std::numbers::pi) * pulse.sigma_g) * std::exp(-0.5 * x * x);
}

double coherent_tail_weight(double alpha_abs, std::size_t n_max) {
    const double mean = alpha_abs * alpha_abs;
    if (mean == 0.0) return 0.0;
    // sum the upper tail directly; terms decay geometrically past the mean
    double log_term = -mean + static_cast<double>(n_max + 1) * std::log(mean) -
                      std::lgamma(static_cast<double>(n_max + 2));
    double tail = 0.0;
    for (std::size_t n = n_max + 1; n < n_max + 100000; ++n) {
        const double term = std::exp(log_term);
        tail += term;
        if (static_cast<double>(n) > mean && term < 1e-30 * (tail + 1e-300)) break;
        if (static_cast<double>(n) > mean && term < 1e-300) break;
        log_term += std::log(mean) - std::log(static_cast<double>(n + 1));
    }
    return tail;
}

std::size_t default_cutoff(double alpha_abs) {
    auto n = static_cast<std::size_t>(std::ceil(alpha_abs * alpha_abs + 8.0 * alpha_abs + 10.0));
    while (coherent_tail_weight(alpha_abs, n) >= kTailTolerance) ++n;
    std::size_t pow2 = 1;
    while (pow2 < n) pow2 <<= 1;
    return pow2;
}

}  // namespace kerr
