#include "catch_amalgamated.hpp"

#include "kerr/analysis.hpp"
#include "kerr/classical.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace kerr;
using namespace kerr::analysis;
using Catch::Approx;

namespace {

const double kPi = std::numbers::pi;

TimeSeries sampled(double t0, double t1, double dt, const std::function<double(double)>& f) {
    TimeSeries s;
    for (double t : TimeGrid{t0, t1, dt}.samples()) {
        s.times.push_back(t);
        s.values.push_back(f(t));
    }
    return s;
}

const double kBumpCarrier = 200.0;

// slowly varying amplitude on a carrier, with a small deterministic ripple
TimeSeries bump_series(double centre, double shift = 0.0) {
    const double w = kBumpCarrier;
    return sampled(shift, 3.0 + shift, 1e-3, [&](double t) {
        const double u = t - shift;
        const double amp = 0.05 + 0.02 * std::sin(37.0 * u) * std::sin(5.3 * u) +
                           std::exp(-std::pow((u - centre) / 0.03, 2) / 2);
        return amp * std::cos(w * (u - centre));
    });
}

}  // namespace

TEST_CASE("echo kind names") {
    for (EchoKind k : {EchoKind::classical_echo, EchoKind::quantum_echo, EchoKind::half_revival,
                       EchoKind::quarter_revival}) {
        CHECK(echo_kind_from_string(to_string(k)) == k);
    }
    CHECK(to_string(EchoKind::quantum_echo) == "quantum-echo");
    CHECK_THROWS_AS(echo_kind_from_string("echo"), InvalidParameter);
}

TEST_CASE("window widths and carrier") {
    CHECK(default_half_width(EchoKind::classical_echo, 0.5) == 0.25);
    CHECK(default_half_width(EchoKind::quarter_revival, 0.5) == 0.125);
    CHECK(carrier_frequency(1.0, std::sqrt(72.0)) == Approx(73.0));
}

TEST_CASE("envelope of a pure cosine") {
    const double A = 2.5, w = 30.0;
    auto env = envelope(sampled(0.0, 5.0, 2e-3, [&](double t) { return A * std::cos(w * t + 0.3); }), w);
    for (std::size_t i = 0; i < env.size(); ++i) CHECK(env.values[i] == Approx(A).epsilon(0.01));
}

TEST_CASE("envelope of the free-decay signal") {
    const double q0 = std::sqrt(72.0);
    const double sigma = classical::kCoherentSigma;
    auto series = sampled(0.0, 0.3, 1e-4, [&](double t) { return classical::analytic_mean_q_free(t, q0, 1.0).value; });
    auto env = envelope(series, carrier_frequency(1.0, q0));
    double worst = 0.0;
    for (std::size_t i = 0; i < env.size(); ++i) {
        const double ref = q0 * std::exp(-2 * q0 * q0 * sigma * sigma * env.times[i] * env.times[i]);
        if (ref > 0.05 * q0) worst = std::max(worst, std::abs(env.values[i] / ref - 1.0));
    }
    CHECK(worst < 0.02);
    for (std::size_t i = 0; i < env.size(); ++i) CHECK(env.values[i] >= std::abs(series.values[i]));
}

TEST_CASE("envelope edge cases") {
    auto zero = envelope(sampled(0.0, 1.0, 1e-3, [](double) { return 0.0; }), 10.0);
    for (double v : zero.values) CHECK(v == 0.0);
    try {
        envelope(sampled(0.0, 1.0, 0.1, [](double t) { return std::cos(73.0 * t); }), 73.0);
        FAIL("expected UndersampledError");
    } catch (const UndersampledError& e) {
        CHECK(e.required_dt() == Approx(2 * kPi / (8 * 73.0)));
        CHECK(std::string(e.what()).find("dt_out") != std::string::npos);
    }
}

TEST_CASE("synthetic bump is detected once") {
    const double tau = 0.5;
    auto series = bump_series(2 * tau);
    std::vector<PredictedEvent> windows{{EchoKind::classical_echo, 1, 2 * tau, tau / 2, std::nullopt},
                                        {EchoKind::classical_echo, 2, 4 * tau, tau / 2, std::nullopt}};
    auto events = detect_echoes(series, kBumpCarrier, windows);
    REQUIRE(events.size() == 1);
    CHECK(events[0].order == 1);
    CHECK(std::abs(events[0].t_detected - 2 * tau) <= 1e-3 + 1e-12);
    CHECK(events[0].amplitude == Approx(1.0).epsilon(0.1));
    CHECK(events[0].amplitude > events[0].threshold);
    CHECK(std::abs(events[0].t_detected - events[0].t_predicted) <= tau / 2);
}

TEST_CASE("unkicked free decay has no echoes") {
    const double q0 = std::sqrt(72.0);
    auto series = sampled(0.0, 3.5, 1e-3, [&](double t) { return classical::analytic_mean_q_free(t, q0, 1.0).value; });
    std::vector<PredictedEvent> windows;
    for (int n = 1; n <= 3; ++n) windows.push_back({EchoKind::classical_echo, n, 1.0 * n, 0.25, std::nullopt});
    CHECK(detect_echoes(series, carrier_frequency(1.0, q0), windows).empty());
}

TEST_CASE("overlapping windows are rejected") {
    auto series = bump_series(1.0);
    std::vector<PredictedEvent> windows{{EchoKind::classical_echo, 1, 1.0, 0.25, std::nullopt},
                                        {EchoKind::quantum_echo, 1, 1.3, 0.25, std::nullopt}};
    CHECK_THROWS_AS(detect_echoes(series, kBumpCarrier, windows), InvalidParameter);
}

TEST_CASE("detection is translation covariant") {
    const double shift = 0.375;
    std::vector<PredictedEvent> w0{{EchoKind::classical_echo, 1, 1.0, 0.25, std::nullopt}};
    std::vector<PredictedEvent> w1{{EchoKind::classical_echo, 1, 1.0 + shift, 0.25, std::nullopt}};
    auto a = detect_echoes(bump_series(1.0), kBumpCarrier, w0);
    auto b = detect_echoes(bump_series(1.0, shift), kBumpCarrier, w1);
    REQUIRE(a.size() == 1);
    REQUIRE(b.size() == 1);
    CHECK(b[0].t_detected - a[0].t_detected == Approx(shift).margin(1e-12));
    CHECK(b[0].amplitude == Approx(a[0].amplitude).epsilon(1e-6));
}

TEST_CASE("amplitude ignores a constant offset") {
    auto env = envelope(bump_series(1.0), kBumpCarrier);
    auto lifted = env;
    for (double& v : lifted.values) v += 3.0;
    std::vector<PredictedEvent> w{{EchoKind::classical_echo, 1, 1.0, 0.25, std::nullopt}};
    auto a = measure_windows(env, w, 1.0);
    auto b = measure_windows(lifted, w, 1.0);
    CHECK(b[0].amplitude == Approx(a[0].amplitude).epsilon(1e-12));
    CHECK(b[0].baseline == Approx(a[0].baseline + 3.0).epsilon(1e-12));
}

TEST_CASE("a series that vanishes by symmetry has no events") {
    auto series = sampled(0.0, 3.0, 1e-3, [](double t) { return 1e-16 * std::cos(20.0 * t) * std::sin(3.0 * t); });
    std::vector<PredictedEvent> w{{EchoKind::quantum_echo, 1, 1.0, 0.25, std::nullopt}};
    CHECK(detect_echoes(series, 20.0, w).empty());
}

TEST_CASE("comparison report") {
    EchoEvent ev;
    ev.amplitude = 0.33;
    ev.prediction = 0.3;
    EchoEvent zero;
    zero.kind = EchoKind::quantum_echo;
    zero.prediction = 0.0;
    EchoEvent bare;
    auto r = compare_to_prediction({ev, zero, bare});
    REQUIRE(r.entries.size() == 2);
    CHECK(r.entries[0].ratio == Approx(1.1));
    CHECK(r.entries[0].deviation == Approx(0.1));
    CHECK(r.entries[1].exact_match);
    CHECK(r.entries[1].deviation == 0.0);
    CHECK(r.max_abs_deviation == Approx(0.1));
    CHECK(r.mean_abs_deviation == Approx(0.05));

    std::vector<PredictedEvent> models{{EchoKind::classical_echo, 1, 1.0, 0.25, 0.33}};
    EchoEvent plain;
    plain.amplitude = 0.33;
    CHECK(compare_to_prediction({plain}, models).entries[0].exact_match == false);
    CHECK(compare_to_prediction({plain}, models).entries[0].deviation == Approx(0.0).margin(1e-15));
    models[0].kind = EchoKind::half_revival;
    CHECK_THROWS_AS(compare_to_prediction({plain}, models), InvalidParameter);
}

namespace {

Scenario sweep_base() {
    Scenario base;
    base.oscillator.chi = 1.0;
    base.pulse = KickPulse{0.01, 0.27, 1e-3, PulseShape::gaussian};
    base.state = CatSpec{6.0, 1.0, 0.0, 0.0};
    base.fock = {128};
    base.grid = {0.0, 1.5, 1e-3};
    return base;
}

}  // namespace

TEST_CASE("sweep on the symmetric cat") {
    const std::vector<double> thetas{0.0, kPi / 2, kPi};
    auto grid = sweep_cat_echo_amplitudes(sweep_base(), thetas, {0.5}, SweepEngine::impulsive, 2);
    REQUIRE(grid.classical.size() == 1);
    REQUIRE(grid.quantum[0].size() == 3);
    for (std::size_t c = 0; c < 3; ++c) CHECK_FALSE(grid.classical_detected[0][c]);
    CHECK_FALSE(grid.quantum_detected[0][0]);
    CHECK(grid.quantum_detected[0][1]);
    CHECK_FALSE(grid.quantum_detected[0][2]);

    auto serial = sweep_cat_echo_amplitudes(sweep_base(), thetas, {0.5}, SweepEngine::impulsive, 1);
    CHECK(serial.quantum == grid.quantum);

    const auto path = std::filesystem::temp_directory_path() / "kerr_sweep_test.csv";
    write_sweep_csv(path, grid, true);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header.rfind("n_plus_sq\\theta,0,", 0) == 0);
    std::filesystem::remove(path);
}

TEST_CASE("sweep edge cases") {
    auto empty = sweep_cat_echo_amplitudes(sweep_base(), {}, {0.5});
    CHECK(empty.classical.size() == 1);
    CHECK(empty.classical[0].empty());
    CHECK_THROWS_AS(sweep_cat_echo_amplitudes(sweep_base(), {0.0}, {1.2}), InvalidParameter);
    Scenario no_pulse = sweep_base();
    no_pulse.pulse.reset();
    CHECK_THROWS_AS(sweep_cat_echo_amplitudes(no_pulse, {0.0}, {0.5}), InvalidParameter);
}
