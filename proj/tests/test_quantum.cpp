#include "catch_amalgamated.hpp"

#include "kerr/quantum.hpp"
#include "kerr/special.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace kerr;
using namespace kerr::quantum;
using Catch::Approx;

namespace {

const double kPi = std::numbers::pi;
const cplx I{0.0, 1.0};

// <phi| a |psi>
cplx lowering_element(const StateVector& phi, const StateVector& psi) {
    cplx s = 0.0;
    for (Eigen::Index n = 1; n < psi.size(); ++n) s += std::conj(phi(n - 1)) * std::sqrt(double(n)) * psi(n);
    return s;
}

CatSpec fig3_cat(double theta = kPi / 2) { return CatSpec{6.0, std::sqrt(0.8), std::sqrt(0.2), theta}; }

}  // namespace

TEST_CASE("operator set") {
    auto ops = build_operators(1.0, {8});
    CHECK(ops.dimension() == 9);
    CHECK(ops.energies(0) == 0.5);
    CHECK(ops.energies(2) == 4.5);
    CHECK(build_operators(0.3, {8}).energies(0) == 0.5);
    auto x2 = ops.x2_dense();
    CHECK(x2(0, 0) == Approx(1.0));
    CHECK(x2(2, 0) == Approx(std::sqrt(2.0)));
    CHECK(x2(0, 2) == x2(2, 0));
    CHECK(x2(1, 0) == 0.0);
    CHECK((x2 - x2.transpose()).norm() == 0.0);
    // (a + a^dagger)^2 from the ladder matrices, away from the truncation edge
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(9, 9);
    for (int n = 1; n < 9; ++n) a(n - 1, n) = std::sqrt(double(n));
    Eigen::MatrixXd x = a + a.transpose();
    Eigen::MatrixXd ref = x * x;
    CHECK((ref.topLeftCorner(8, 8) - x2.topLeftCorner(8, 8)).norm() < 1e-13);
    StateVector v = StateVector::Random(9);
    CHECK((ops.apply_x2(v) - x2.cast<cplx>() * v).norm() < 1e-13);
    CHECK_THROWS_AS(build_operators(1.0, {1}), InvalidParameter);
}

TEST_CASE("coherent state vector") {
    auto vac = coherent_state_vector(0.0, {16});
    CHECK(std::abs(vac(0) - 1.0) < 1e-15);
    CHECK(vac.tail(16).norm() == 0.0);
    auto psi = coherent_state_vector(6.0, {128});
    CHECK(psi.norm() == Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(expectation_n(psi) - 36.0) < 1e-8);
    CHECK(std::abs(expectation_a(psi) - 6.0) < 1e-8);
    auto tilted = coherent_state_vector(cplx(1.5, -2.0), {64});
    CHECK(std::abs(expectation_a(tilted) - cplx(1.5, -2.0)) < 1e-8);
    CHECK_THROWS_AS(coherent_state_vector(6.0, {40}), CutoffError);
}

TEST_CASE("cat state vector") {
    auto degenerate = cat_state_vector(CatSpec{6.0, 1.0, 0.0, 0.0}, {128});
    CHECK(fidelity(degenerate, coherent_state_vector(6.0, {128})) == Approx(1.0).epsilon(1e-14));

    auto even = cat_state_vector(CatSpec{6.0, 1.0, 1.0, 0.0}, {128});
    double odd_weight = 0.0;
    for (Eigen::Index n = 1; n < even.size(); n += 2) odd_weight = std::max(odd_weight, std::abs(even(n)));
    CHECK(odd_weight < 1e-10);
    CHECK(std::abs(expectation_a(even)) < 1e-10);

    auto cat = cat_state_vector(fig3_cat(), {128});
    CHECK(cat.norm() == Approx(1.0).epsilon(1e-12));
    CHECK(expectation_q(cat) == Approx(0.6 * std::sqrt(2.0) * 6.0).epsilon(1e-10));
    CHECK_THROWS(cat_state_vector(CatSpec{6.0, 0.0, 0.0, 0.0}, {128}));
}

TEST_CASE("free evolution") {
    auto ops = build_operators(1.0, {128});
    auto psi = coherent_state_vector(6.0, {128});
    CHECK((evolve_free(psi, ops, 0.0) - psi).norm() == 0.0);
    CHECK(fidelity(evolve_free(psi, ops, 2 * kPi), psi) == Approx(1.0).margin(1e-12));
    CHECK(std::abs(expectation_q(evolve_free(psi, ops, kPi)) + std::sqrt(2.0) * 6.0) < 1e-8);
    CHECK(evolve_free(psi, ops, 1.234).norm() == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("free evolution against the closed forms") {
    auto ops = build_operators(1.0, {128});
    auto coh = coherent_state_vector(6.0, {128});
    auto cat = cat_state_vector(fig3_cat(), {128});
    double worst_coh = 0.0, worst_cat = 0.0;
    for (double t = 0.0; t <= 2 * kPi; t += 0.01) {
        worst_coh = std::max(worst_coh, std::abs(expectation_a(evolve_free(coh, ops, t)) - analytic_mean_a_coherent(6.0, 1.0, t)));
        if (t <= kPi) {
            worst_cat = std::max(worst_cat, std::abs(expectation_a(evolve_free(cat, ops, t)) - analytic_mean_a_cat(fig3_cat(), 1.0, t)));
        }
    }
    CHECK(worst_coh < 1e-8);
    CHECK(worst_cat < 1e-8);
}

TEST_CASE("pulse window integration") {
    auto ops = build_operators(1.0, {128});
    auto psi = coherent_state_vector(6.0, {128});
    KickPulse p{0.0, 0.5, 1e-3, PulseShape::gaussian};
    auto [lo, hi] = p.window();
    auto start = evolve_free(psi, ops, lo);
    auto a = evolve_pulse_window(start, ops, p, lo, hi);
    CHECK(1.0 - fidelity(a, evolve_free(start, ops, hi - lo)) < 1e-10);

    p.g0 = 0.01;
    auto pulsed = evolve_pulse_window(start, ops, p, lo, hi);
    CHECK(pulsed.norm() == Approx(1.0).margin(1e-9));
    auto impulsive = evolve_free(impulsive_kick_unitary(evolve_free(start, ops, p.tau - lo), ops, p.g0), ops, hi - p.tau);
    const double deficit = 1.0 - fidelity(pulsed, impulsive);
    CHECK(deficit < 1e-4);

    // the deficit shrinks with the pulse width
    KickPulse narrow = p;
    narrow.sigma_g = 5e-4;
    auto [nlo, nhi] = narrow.window();
    auto nstart = evolve_free(psi, ops, nlo);
    auto npulsed = evolve_pulse_window(nstart, ops, narrow, nlo, nhi);
    auto nimp = evolve_free(impulsive_kick_unitary(evolve_free(nstart, ops, narrow.tau - nlo), ops, p.g0), ops, nhi - narrow.tau);
    CHECK(1.0 - fidelity(npulsed, nimp) < 0.5 * deficit);
}

TEST_CASE("impulsive kick unitary") {
    auto ops = build_operators(1.0, {64});
    auto psi = coherent_state_vector(cplx(2.0, 1.0), {64});
    CHECK((impulsive_kick_unitary(psi, ops, 0.0) - psi).norm() < 1e-15);
    CHECK(impulsive_kick_unitary(psi, ops, 0.03).norm() == Approx(1.0).margin(1e-12));
    auto u = kick_unitary_matrix(ops, 0.03);
    CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(65, 65)).norm() < 1e-10);

    auto vac = coherent_state_vector(0.0, {64});
    const double n = expectation_n(impulsive_kick_unitary(vac, ops, 0.01));
    CHECK(n == Approx(std::pow(std::sinh(0.01), 2)).epsilon(0.05));
    CHECK(n == Approx(1e-4).epsilon(0.05));
}

TEST_CASE("squeeze kick amplitude") {
    const cplx a = squeeze_kick_amplitude(6.0, 0.01);
    CHECK(a.real() == Approx(6.0003).margin(1e-4));
    CHECK(a.imag() == Approx(0.0600).margin(1e-4));
    CHECK(squeeze_kick_amplitude(cplx(1.0, 2.0), 0.0) == cplx(1.0, 2.0));
    const cplx b = squeeze_kick_amplitude(6.0 * I, 0.01);
    CHECK(b.real() == Approx(0.06).margin(1e-4));
    CHECK(b.imag() == Approx(6.0003).margin(1e-4));
    CHECK(squeeze_kick_amplitude(6.0, 0.01, DisplacementForm::linearized) == cplx(6.0, 0.06));
    CHECK(squeeze_kick_amplitude(6.0, 0.01, DisplacementForm::shear) == cplx(6.0, 0.12));
}

TEST_CASE("expectation values") {
    CHECK(std::abs(expectation_a(coherent_state_vector(0.0, {16}))) == 0.0);
    CHECK(expectation_q(coherent_state_vector(2.0, {64})) == Approx(2.0 * std::sqrt(2.0)).epsilon(1e-10));
}

TEST_CASE("coherent matrix element") {
    CHECK(std::abs(coherent_matrix_element(6.0, 6.0, 1.0, 0.7) - analytic_mean_a_coherent(6.0, 1.0, 0.7)) < 1e-12);
    const cplx al(1.2, -0.4);
    CHECK(std::abs(coherent_matrix_element(al, al, 1.0, 0.0) - al) < 1e-14);

    FockSpaceSpec fock{64};
    auto ops = build_operators(1.0, fock);
    for (auto [beta, alpha] : {std::pair{cplx(2.0), cplx(-2.0)}, std::pair{cplx(1.0, 1.0), cplx(-0.5, 2.0)}}) {
        const double t = 0.3;
        auto b = evolve_free(coherent_state_vector(beta, fock), ops, t);
        auto a = evolve_free(coherent_state_vector(alpha, fock), ops, t);
        CHECK(std::abs(coherent_matrix_element(beta, alpha, 1.0, t) - lowering_element(b, a)) < 1e-8);
    }
    CHECK(std::abs(coherent_overlap(2.0, 2.0) - 1.0) < 1e-15);
    CHECK(std::abs(coherent_overlap(2.0, -2.0)) == Approx(std::exp(-8.0)));
}

TEST_CASE("coherent closed form") {
    CHECK(analytic_mean_a_coherent(6.0, 1.0, 0.0) == cplx(6.0));
    CHECK(std::abs(analytic_mean_a_coherent(6.0, 1.0, kPi) + 6.0) < 1e-10);
    CHECK(std::abs(analytic_mean_a_coherent(6.0, 1.0, kPi / 2)) == Approx(6.0 * std::exp(-72.0)).epsilon(1e-8));
}

TEST_CASE("cat closed form") {
    CatSpec sym{6.0, 1.0, 1.0, 0.0};
    for (double t : {0.0, 0.4, kPi / 2, kPi}) CHECK(std::abs(analytic_mean_a_cat(sym, 1.0, t)) < 1e-12);
    const double q = std::sqrt(2.0) * analytic_mean_a_cat(fig3_cat(), 1.0, kPi / 2).real();
    CHECK(q == Approx(-6.788).epsilon(1e-3));
    const double flipped = std::sqrt(2.0) * analytic_mean_a_cat(fig3_cat(-kPi / 2), 1.0, kPi / 2).real();
    CHECK(flipped == Approx(-q).epsilon(1e-10));
    CHECK(analytic_mean_a_cat(fig3_cat(-kPi / 2), 1.0, kPi).real() ==
          Approx(analytic_mean_a_cat(fig3_cat(), 1.0, kPi).real()).epsilon(1e-10));
    auto sup = cat_superposition(fig3_cat());
    CHECK(std::abs(sup.mean_a(1.0, 0.37) - analytic_mean_a_cat(fig3_cat(), 1.0, 0.37)) < 1e-12);
}

TEST_CASE("revival structure") {
    auto ops = build_operators(1.0, {128});
    auto coh = coherent_state_vector(6.0, {128});
    auto cat = cat_state_vector(fig3_cat(), {128});
    const double q0 = std::sqrt(2.0) * 6.0;
    CHECK(std::abs(expectation_q(evolve_free(coh, ops, 2 * kPi))) == Approx(q0).epsilon(1e-8));
    CHECK(std::abs(expectation_q(evolve_free(coh, ops, kPi / 2))) < 1e-8);
    CHECK(std::abs(expectation_q(evolve_free(cat, ops, kPi / 2))) > 0.5 * q0);
}

TEST_CASE("revival times") {
    auto r = revival_times(1.0);
    CHECK(r.t_rev == Approx(2 * kPi));
    REQUIRE(r.fractional.size() == 2);
    CHECK(r.fractional[0] == Approx(kPi));
    CHECK(r.fractional[1] == Approx(kPi / 2));
    CHECK(revival_times(2.0).t_rev == Approx(kPi));
    CHECK_THROWS_AS(revival_times(0.0), InvalidParameter);
}

TEST_CASE("Gauss sums") {
    CHECK(std::abs(gauss_sum_direct(3, 1) - (-I / std::sqrt(3.0))) < 1e-14);
    CHECK(std::abs(gauss_sum_closed_form(3, 1) - (-I / std::sqrt(3.0))) < 1e-14);
    CHECK(std::abs(gauss_sum_closed_form(5, 1) - 1.0 / std::sqrt(5.0)) < 1e-14);
    double worst = 0.0, worst_mod = 0.0;
    for (int nu = 3; nu <= 23; nu += 2) {
        for (int k = 0; k < nu; ++k) {
            worst = std::max(worst, std::abs(gauss_sum_closed_form(nu, k) - gauss_sum_direct(nu, k)));
            worst_mod = std::max(worst_mod, std::abs(std::abs(gauss_sum_direct(nu, k)) - 1.0 / std::sqrt(double(nu))));
        }
    }
    CHECK(worst < 1e-12);
    CHECK(worst_mod < 1e-12);
    CHECK_THROWS_AS(gauss_sum_closed_form(4, 1), InvalidParameter);
}

TEST_CASE("selection rule") {
    CHECK(selection_rule(23, 1) == 2);
    CHECK(selection_rule(23, -1) == 17);
    CHECK(selection_rule(23, 2) == 6);
    for (int nu = 3; nu <= 23; nu += 4) {
        for (int r = -5; r <= 5; ++r) {
            const int l = selection_rule(nu, r);
            CHECK(l >= 0);
            CHECK(l < nu);
            // l (nu + 1)/2 + 1 - 2 r* = 0 mod nu
            CHECK(((l * (nu + 1) / 2 + 1 - 2 * r) % nu + nu) % nu == 0);
        }
    }
    CHECK_THROWS_AS(selection_rule(21, 1), InvalidParameter);
    CHECK_THROWS_AS(selection_rule(22, 1), InvalidParameter);
}

TEST_CASE("fractional revival decomposition") {
    auto d3 = fractional_revival_decomposition(3.0, 1.0, 3);
    REQUIRE(d3.coefficients.size() == 3);
    CHECK(std::abs(d3.coefficients[1] - (-I / std::sqrt(3.0))) < 1e-14);
    for (int nu : {3, 5, 7}) {
        FockSpaceSpec fock{64};
        auto ops = build_operators(1.0, fock);
        auto d = fractional_revival_decomposition(3.0, 1.0, nu);
        CHECK(d.time == Approx(2 * kPi / nu));
        for (auto a : d.amplitudes) CHECK(std::abs(a) == Approx(3.0));
        auto sup = d.superposition();
        CHECK(sup.norm_squared() == Approx(1.0).epsilon(1e-8));
        auto numeric = evolve_free(coherent_state_vector(3.0, fock), ops, d.time);
        CHECK(fidelity(sup.to_fock(fock), numeric) > 1.0 - 1e-10);
    }
}

TEST_CASE("kicked superposition without a kick is the free trace") {
    const double tau = 2 * kPi / 19;
    for (double t : {tau + 0.1, 1.0, 2.5, kPi}) {
        CHECK(std::abs(kicked_mean_a_superposition(6.0, 1.0, 0.0, 19, t) - analytic_mean_a_coherent(6.0, 1.0, t)) < 1e-10);
    }
    auto v = kicked_mean_a_superposition(6.0, 1.0, 0.01, 19, std::vector<double>{1.0, 2.0});
    CHECK(v[0] == kicked_mean_a_superposition(6.0, 1.0, 0.01, 19, 1.0));
}

TEST_CASE("kicked superposition shows the quantum echo") {
    const double tau = 2 * kPi / 19;
    double at_echo = 0.0, between = 0.0;
    for (double t = kPi - 2 * tau - 0.05; t <= kPi - 2 * tau + 0.05; t += 0.0005) {
        at_echo = std::max(at_echo, std::abs(kicked_mean_a_superposition(6.0, 1.0, 0.01, 19, t)));
    }
    for (double t = kPi / 2 - 0.05; t <= kPi / 2 + 0.05; t += 0.0005) {
        between = std::max(between, std::abs(kicked_mean_a_superposition(6.0, 1.0, 0.01, 19, t)));
    }
    CHECK(at_echo > 0.5);
    CHECK(between < 0.05);
}

namespace {

double superposition_vs_fock(DisplacementForm form) {
    const double tau = 2 * kPi / 19;
    FockSpaceSpec fock{128};
    auto ops = build_operators(1.0, fock);
    KickPulse p{0.01, tau, 1e-3, PulseShape::gaussian};
    TimeGrid grid{0.0, kPi, 0.01};
    QuantumRunOptions opt;
    opt.impulsive = true;
    auto trace = evolve_trace(coherent_state_vector(6.0, fock), ops, p, grid, opt);
    double worst = 0.0;
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
        const double t = trace.times[i];
        if (t <= tau) continue;
        const double q = std::sqrt(2.0) * kicked_mean_a_superposition(6.0, 1.0, 0.01, 19, t, form).real();
        worst = std::max(worst, std::abs(q - std::sqrt(2.0) * trace.mean_a[i].real()));
    }
    return worst;
}

}  // namespace

TEST_CASE("kicked superposition tracks the Fock propagation") {
    // the coherent-component treatment drops the vacuum squeezing, which is O(g0 q0)
    CHECK(superposition_vs_fock(DisplacementForm::squeeze) < 0.1);
}

TEST_CASE("kicked superposition within 1e-3 of the Fock propagation", "[!mayfail]") {
    CHECK(superposition_vs_fock(DisplacementForm::squeeze) < 1e-3);
}

TEST_CASE("echo prediction") {
    const double tau = 2 * kPi / 19;
    auto e = kicked_echo_prediction(6.0, 1.0, 0.01, 19, 1, 2 * tau);
    CHECK(e.l == 2);
    CHECK(e.t_echo == Approx(2 * tau));
    CHECK(e.amplitude == Approx(bessel_j(1, 72.0 * 0.01 * std::sin(2 * tau))).epsilon(1e-10));
    // the small-tau form J1(2 chi tau g0 q0^2)
    CHECK(e.amplitude == Approx(0.2314).epsilon(0.08));
    CHECK(kicked_echo_prediction(6.0, 1.0, 0.0, 19, 1, 2 * tau).amplitude == 0.0);
    CHECK(kicked_echo_prediction(6.0, 1.0, 0.0, 19, -1, kPi - 2 * tau).amplitude == 0.0);
    auto q = kicked_echo_prediction(6.0, 1.0, 0.01, 23, -1, kPi - 4 * kPi / 23);
    CHECK(q.t_echo == Approx(kPi - 4 * kPi / 23));
    CHECK(q.l == 17);
    CHECK_THROWS_AS(kicked_echo_prediction(6.0, 1.0, 0.01, 21, 1, 1.0), InvalidParameter);
}

TEST_CASE("echo prediction against the kicked superposition") {
    const double tau = 2 * kPi / 23;
    double predicted = 0.0, exact = 0.0;
    for (double t = 2 * tau - 0.05; t <= 2 * tau + 0.05; t += 0.0005) {
        predicted = std::max(predicted, std::abs(kicked_echo_prediction(6.0, 1.0, 0.01, 23, 1, t).mean_a));
        exact = std::max(exact, std::abs(kicked_mean_a_superposition(6.0, 1.0, 0.01, 23, t)));
    }
    CHECK(exact / predicted == Approx(1.0).epsilon(0.1));
}

TEST_CASE("trace driver") {
    FockSpaceSpec fock{64};
    auto ops = build_operators(1.0, fock);
    auto psi = coherent_state_vector(3.0, fock);
    TimeGrid grid{0.0, 1.0, 0.1};
    auto free = evolve_trace(psi, ops, std::nullopt, grid);
    REQUIRE(free.times.size() == 11);
    for (std::size_t i = 0; i < free.times.size(); ++i) {
        CHECK(std::abs(free.mean_a[i] - analytic_mean_a_coherent(3.0, 1.0, free.times[i])) < 1e-10);
    }
    KickPulse p{0.01, 0.45, 1e-3, PulseShape::gaussian};
    auto kicked = evolve_trace(psi, ops, p, grid);
    CHECK(kicked.max_norm_drift < 1e-9);
    QuantumRunOptions imp;
    imp.impulsive = true;
    auto kicked_imp = evolve_trace(psi, ops, p, grid, imp);
    CHECK(std::abs(kicked.mean_a.back() - kicked_imp.mean_a.back()) < 1e-3);
    auto direct = propagate(psi, ops, p, 0.0, 1.0);
    CHECK(std::abs(expectation_a(direct) - kicked.mean_a.back()) < 1e-12);
}

TEST_CASE("square pulse keeps the norm") {
    FockSpaceSpec fock{128};
    auto ops = build_operators(1.0, fock);
    KickPulse sq{0.01, 0.27, 1e-3, PulseShape::square};
    auto psi = propagate(coherent_state_vector(6.0, fock), ops, sq, 0.0, 0.5);
    CHECK(psi.norm() == Approx(1.0).margin(1e-9));
}

TEST_CASE("state CSV") {
    const auto path = std::filesystem::temp_directory_path() / "kerr_state_test.csv";
    write_state_csv(path, coherent_state_vector(0.0, {4}));
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "n,re,im");
    CHECK(row == "0,1,0");
    std::filesystem::remove(path);
}
