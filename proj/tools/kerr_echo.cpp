// kerr-echo: scenario runner for the kicked Kerr oscillator engines.

#include "kerr/analysis.hpp"
#include "kerr/classical.hpp"
#include "kerr/lindblad.hpp"
#include "kerr/quantum.hpp"
#include "kerr/scenario_io.hpp"
#include "kerr/time_series.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <thread>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace kerr;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kValidation = 3, kEngine = 4 };

struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EngineFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    bool force = false;
    bool long_run = false;
    std::vector<std::string> overrides;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
};

// Collects output files and the panel -> file index for one run.
class RunContext {
public:
    RunContext(std::string command, const CommonOptions& opts) : command_(std::move(command)), opts_(opts) {}

    const fs::path& dir() const { return dir_; }
    const CommonOptions& options() const { return opts_; }
    void set_dir(fs::path d) { dir_ = std::move(d); }

    fs::path add(const std::string& panel, const std::string& file) {
        index_.push_back({panel, file});
        files_.push_back(file);
        return dir_ / file;
    }

    /// A file that belongs to the run but is not a plot panel.
    fs::path side_file(const std::string& file) {
        files_.push_back(file);
        return dir_ / file;
    }

    void time(const std::string& label, double seconds) { timings_[label] = seconds; }

    void write_json(const std::string& panel, const std::string& file, const json& doc) {
        std::ofstream out(add(panel, file));
        out << doc.dump(2) << "\n";
        if (!out) throw EngineFailure("failed writing " + (dir_ / file).string());
    }

    void write_index() const {
        json panels = json::array();
        for (const auto& [panel, file] : index_) panels.push_back({{"panel", panel}, {"file", file}});
        std::ofstream out(dir_ / "index.json");
        out << json{{"schema", "kerr-echo/index/1"}, {"command", command_}, {"panels", panels}}.dump(2) << "\n";
        if (!out) throw EngineFailure("failed writing index.json");
    }

    void write_manifest(const std::optional<Scenario>& scenario, const std::string& status,
                        const std::string& message) const {
        json files = files_;
        json doc{{"schema", "kerr-echo/manifest/1"},
                 {"command", command_},
                 {"version", KERR_ECHO_VERSION},
                 {"engines",
                  {{"classical", "dopri5-window+exact-rotation"},
                   {"quantum", "exact-phases+lawson-rk4"},
                   {"lindblad", "lawson-rk4"}}},
                 {"status", status}};
        if (!message.empty()) doc["message"] = message;
        if (scenario) {
            doc["scenario_hash"] = scenario_hash(*scenario);
            doc["seed"] = scenario->ensemble.seed;
            doc["scenario"] = to_scenario_text(*scenario);
        }
        doc["overrides"] = opts_.overrides;
        doc["threads"] = opts_.threads;
        doc["long"] = opts_.long_run;
        doc["outputs"] = files;
        doc["timings_s"] = timings_;
        std::ofstream out(dir_ / "manifest.json");
        out << doc.dump(2) << "\n";
    }

private:
    std::string command_;
    const CommonOptions& opts_;
    fs::path dir_;
    std::vector<std::pair<std::string, std::string>> index_;
    std::vector<std::string> files_;
    std::map<std::string, double> timings_;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

RawConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    if (fs::path(path).extension() == ".json") {
        // rerun from a manifest
        std::ifstream in(path);
        if (!in) throw ConfigError(std::vector<FieldError>{{"config", "cannot open " + path}});
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(std::vector<FieldError>{{"config", path + ": " + e.what()}});
        }
        if (!doc.contains("scenario")) throw ConfigError(std::vector<FieldError>{{"config", path + ": manifest has no scenario"}});
        return parse_scenario_text(doc["scenario"].get<std::string>());
    }
    return load_scenario_file(path);
}

Scenario resolve_scenario(const CommonOptions& opts, bool config_required) {
    if (config_required && opts.config.empty()) throw ConfigError(std::vector<FieldError>{{"config", "--config is required"}});
    RawConfig raw = load_config(opts.config);
    for (const auto& o : opts.overrides) apply_override(raw, o);
    if (opts.seed) raw["ensemble.seed"] = std::to_string(*opts.seed);
    return validate_config(raw);
}

void prepare_out_dir(const CommonOptions& opts, RunContext& ctx) {
    const fs::path dir(opts.out);
    std::error_code ec;
    if (fs::exists(dir, ec)) {
        if (!fs::is_directory(dir, ec)) throw EngineFailure(dir.string() + " exists and is not a directory");
        if (!fs::is_empty(dir, ec) && !opts.force) {
            throw EngineFailure("output directory " + dir.string() + " is not empty; pass --force to overwrite");
        }
    } else if (!fs::create_directories(dir, ec) || ec) {
        throw EngineFailure("cannot create output directory " + dir.string() + ": " + ec.message());
    }
    const fs::path probe = dir / ".write-test";
    {
        std::ofstream test(probe);
        if (!test) throw EngineFailure("output directory " + dir.string() + " is not writable");
    }
    fs::remove(probe, ec);
    ctx.set_dir(dir);
}

json event_json(const analysis::EchoEvent& ev) {
    json j{{"kind", analysis::to_string(ev.kind)},
           {"order", ev.order},
           {"t_predicted", ev.t_predicted},
           {"t_detected", ev.t_detected},
           {"amplitude", ev.amplitude},
           {"baseline", ev.baseline},
           {"noise", ev.noise},
           {"threshold", ev.threshold},
           {"significant", ev.significant}};
    if (ev.prediction) {
        j["prediction"] = *ev.prediction;
        if (*ev.prediction != 0.0) j["deviation"] = ev.amplitude / *ev.prediction - 1.0;
    } else {
        j["prediction"] = nullptr;
    }
    return j;
}

// Keeps windows whose buffers fit inside the trace and that do not overlap earlier ones.
std::vector<analysis::PredictedEvent> fit_windows(std::vector<analysis::PredictedEvent> candidates, double t0,
                                                  double t1) {
    std::vector<analysis::PredictedEvent> out;
    for (const auto& c : candidates) {
        if (c.time - 2.0 * c.half_width < t0 || c.time + 2.0 * c.half_width > t1) continue;
        bool clash = false;
        for (const auto& o : out) clash = clash || std::abs(o.time - c.time) < o.half_width + c.half_width;
        if (!clash) out.push_back(c);
    }
    return out;
}

json echo_report(const TimeSeries& series, double carrier, const std::vector<analysis::PredictedEvent>& windows) {
    const TimeSeries env = analysis::envelope(series, carrier);
    const auto measured = analysis::measure_windows(env, windows, series.max_abs());
    json events = json::array();
    json all = json::array();
    for (const auto& ev : measured) {
        all.push_back(event_json(ev));
        if (ev.significant) events.push_back(event_json(ev));
    }
    return {{"events", events}, {"windows", all}};
}

std::optional<int> revival_order(double tau, double chi) {
    const double nu = 2.0 * std::numbers::pi / (chi * tau);
    const double rounded = std::round(nu);
    if (std::abs(nu - rounded) < 1e-9 * nu && rounded >= 3) return static_cast<int>(rounded);
    return std::nullopt;
}

std::vector<analysis::PredictedEvent> quantum_windows(const Scenario& s, double q0, bool cat) {
    using analysis::EchoKind;
    std::vector<analysis::PredictedEvent> c;
    const double chi = s.oscillator.chi;
    const double half = std::numbers::pi / chi;
    if (s.pulse) {
        const double tau = s.pulse->tau;
        std::optional<int> nu = revival_order(tau, chi);
        if (nu && *nu % 4 != 3) nu.reset();
        const cplx alpha0 = initial_alpha(s.state);
        auto predicted = [&](int r) -> std::optional<double> {
            if (!nu || cat) return std::nullopt;
            return q0 * quantum::kicked_echo_prediction(alpha0, chi, s.pulse->g0, *nu, r, 2.0 * tau).amplitude;
        };
        for (int n = 1; n <= 3; ++n) {
            c.push_back({EchoKind::classical_echo, n, 2.0 * n * tau,
                         analysis::default_half_width(EchoKind::classical_echo, tau), predicted(n)});
        }
        if (cat) {
            c.push_back({EchoKind::quarter_revival, 1, 0.5 * half, analysis::default_half_width(EchoKind::quarter_revival, tau),
                         std::nullopt});
            c.push_back({EchoKind::quantum_echo, 1, 0.5 * half - 2.0 * tau,
                         analysis::default_half_width(EchoKind::quantum_echo, tau), std::nullopt});
        }
        c.push_back({EchoKind::half_revival, 1, half, analysis::default_half_width(EchoKind::half_revival, tau),
                     std::nullopt});
        for (int n = 1; n <= 2; ++n) {
            c.push_back({EchoKind::quantum_echo, n, half - 2.0 * n * tau,
                         analysis::default_half_width(EchoKind::quantum_echo, tau), predicted(-n)});
        }
    } else {
        const double w = 0.1;
        if (cat) c.push_back({EchoKind::quarter_revival, 1, 0.5 * half, w, std::nullopt});
        c.push_back({EchoKind::half_revival, 1, half, w, std::nullopt});
    }
    std::sort(c.begin(), c.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
    return fit_windows(c, s.grid.t_start + 0.15, s.grid.t_end);
}

// --- subcommands -------------------------------------------------------------

void run_classical(const Scenario& s, RunContext& ctx) {
    const auto* coh = std::get_if<CoherentSpec>(&s.state);
    if (!coh) throw ValidationFailure("classical-ensemble requires state.kind = coherent");
    const double q0 = coh->q0();
    const double chi = s.oscillator.chi;

    auto t0 = std::chrono::steady_clock::now();
    const auto samples = classical::sample_initial_ensemble(*coh, s.ensemble);
    ctx.time("sampling", seconds_since(t0));

    classical::EnsembleOptions opts;
    opts.threads = ctx.options().threads;
    opts.integrator.max_step = s.steps.dt_pulse;
    const double extent = std::abs(q0) + std::abs(coh->p0()) + 4.0;
    std::vector<double> snap_times{s.grid.t_start, s.grid.t_start + 0.1};
    if (s.pulse) {
        snap_times.push_back(s.pulse->tau);
        snap_times.push_back(2.0 * s.pulse->tau);
    } else {
        snap_times.push_back(0.5 * (s.grid.t_start + s.grid.t_end));
        snap_times.push_back(s.grid.t_end);
    }
    for (double t : snap_times) {
        if (t < s.grid.t_start || t > s.grid.t_end) continue;
        classical::HistogramSpec h;
        h.time = t;
        h.q_min = h.p_min = -extent;
        h.q_max = h.p_max = extent;
        h.q_bins = h.p_bins = 100;
        opts.snapshots.push_back(h);
    }

    t0 = std::chrono::steady_clock::now();
    const auto free_run = classical::ensemble_mean_q(samples, chi, std::nullopt, s.grid, opts);
    ctx.time("free_ensemble", seconds_since(t0));
    write_mean_q_csv(ctx.add("mean_q_free", "mean_q_free.csv"), free_run.mean_q);

    std::vector<std::vector<double>> rows;
    for (double t : free_run.mean_q.times) {
        const auto v = classical::analytic_mean_q_free(t, q0, chi);
        rows.push_back({t, v.value, v.extrapolated ? 1.0 : 0.0});
    }
    write_csv(ctx.add("mean_q_free_analytic", "mean_q_free_analytic.csv"), {"t", "mean_q", "extrapolated"}, rows);

    classical::EnsembleResult kicked;
    if (s.pulse) {
        t0 = std::chrono::steady_clock::now();
        kicked = classical::ensemble_mean_q(samples, chi, s.pulse, s.grid, opts);
        ctx.time("kicked_ensemble", seconds_since(t0));
        write_mean_q_csv(ctx.add("mean_q_kicked", "mean_q_kicked.csv"), kicked.mean_q);
    }
    const auto& snaps = s.pulse ? kicked.snapshots : free_run.snapshots;
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        classical::write_histogram_csv(ctx.add("snapshot_" + std::to_string(i), "snapshot_" + std::to_string(i) + ".csv"),
                                       snaps[i]);
    }

    if (s.pulse) {
        using analysis::EchoKind;
        const double tau = s.pulse->tau;
        std::vector<analysis::PredictedEvent> candidates;
        for (int n = 1; 2.0 * n * tau < s.grid.t_end; ++n) {
            std::optional<double> pred;
            if (n == 1) pred = q0 * classical::first_echo_amplitude(q0, chi, s.pulse->g0, tau);
            candidates.push_back({EchoKind::classical_echo, n, 2.0 * n * tau,
                                  analysis::default_half_width(EchoKind::classical_echo, tau), pred});
        }
        const auto windows = fit_windows(candidates, s.grid.t_start, s.grid.t_end);
        ctx.write_json("echo_report", "echoes.json",
                       echo_report(kicked.mean_q, analysis::carrier_frequency(chi, q0), windows));
    }
}

void run_quantum(const Scenario& s, RunContext& ctx, bool require_cat) {
    const bool cat = std::holds_alternative<CatSpec>(s.state);
    if (require_cat && !cat) throw ValidationFailure("cat-evolve requires state.kind = cat");
    const double chi = s.oscillator.chi;
    const cplx alpha0 = initial_alpha(s.state);
    const double q0 = std::sqrt(2.0) * std::abs(alpha0);

    auto t0 = std::chrono::steady_clock::now();
    const auto ops = quantum::build_operators(chi, s.fock);
    const auto psi = quantum::prepare_state(s.state, s.fock);
    quantum::QuantumRunOptions run;
    run.dt_pulse = s.steps.dt_pulse;
    const auto trace = quantum::evolve_trace(psi, ops, s.pulse, s.grid, run);
    ctx.time("propagation", seconds_since(t0));
    write_expectation_csv(ctx.add("mean_q", "mean_q.csv"), trace.times, trace.mean_a);
    quantum::write_state_csv(ctx.add("initial_state", "initial_state.csv"), psi);

    if (!s.pulse) {
        std::vector<cplx> analytic;
        for (double t : trace.times) {
            analytic.push_back(cat ? quantum::analytic_mean_a_cat(std::get<CatSpec>(s.state), chi, t - s.grid.t_start)
                                   : quantum::analytic_mean_a_coherent(alpha0, chi, t - s.grid.t_start));
        }
        write_expectation_csv(ctx.add("mean_q_analytic", "mean_q_analytic.csv"), trace.times, analytic);
    } else if (!cat && s.grid.t_start == 0.0) {
        if (const auto nu = revival_order(s.pulse->tau, chi)) {
            std::vector<double> times;
            for (double t : trace.times) {
                if (t > s.pulse->tau) times.push_back(t);
            }
            const auto analytic = quantum::kicked_mean_a_superposition(alpha0, chi, s.pulse->g0, *nu, times);
            write_expectation_csv(ctx.add("mean_q_superposition", "mean_q_superposition.csv"), times, analytic);
        }
    }

    TimeSeries series{trace.times, trace.mean_q(), {}};
    json report = echo_report(series, analysis::carrier_frequency(chi, q0), quantum_windows(s, q0, cat));
    report["max_norm_drift"] = trace.max_norm_drift;
    ctx.write_json("echo_report", "echoes.json", report);
}

void run_sweep(const Scenario& s, RunContext& ctx) {
    if (s.sweep.theta_values.empty() || s.sweep.n_plus_values.empty()) return;
    const auto t0 = std::chrono::steady_clock::now();
    const auto grid = analysis::sweep_cat_echo_amplitudes(s, s.sweep.theta_values, s.sweep.n_plus_values,
                                                          analysis::SweepEngine::pulsed, ctx.options().threads);
    ctx.time("sweep", seconds_since(t0));
    analysis::write_sweep_csv(ctx.add("classical_echo_amplitude", "sweep_classical.csv"), grid, false);
    analysis::write_sweep_csv(ctx.add("quantum_echo_amplitude", "sweep_quantum.csv"), grid, true);
}

void run_lindblad(const Scenario& s, RunContext& ctx) {
    const cplx alpha0 = initial_alpha(s.state);
    if (std::abs(alpha0) > 3.0 && !ctx.options().long_run) {
        throw ValidationFailure("lindblad-evolve with |alpha0| > 3 is a long run; pass --long");
    }
    const double chi = s.oscillator.chi;
    const double q0 = std::sqrt(2.0) * std::abs(alpha0);
    const auto ops = quantum::build_operators(chi, s.fock);
    const auto rho0 = lindblad::pure_density(quantum::prepare_state(s.state, s.fock));
    lindblad::DensityRunOptions opts;
    opts.dt_free = s.steps.dt_free;
    opts.dt_pulse = s.steps.dt_pulse;

    const auto t0 = std::chrono::steady_clock::now();
    const auto result = lindblad::propagate_density(rho0, ops, s.oscillator, s.pulse, s.grid, opts);
    ctx.time("propagation", seconds_since(t0));
    write_expectation_csv(ctx.add("mean_q", "mean_q.csv"), result.times, result.mean_a);

    if (!s.oscillator.epsilon && !s.pulse) {
        std::vector<cplx> analytic;
        for (double t : result.times) {
            analytic.push_back(lindblad::damped_mean_a_analytic(s.state, s.oscillator, t - s.grid.t_start));
        }
        write_expectation_csv(ctx.add("mean_q_analytic", "mean_q_analytic.csv"), result.times, analytic);
    }
    const auto& d = result.diagnostics;
    ctx.write_json("diagnostics", "diagnostics.json",
                   {{"max_trace_drift", d.max_trace_drift},
                    {"max_hermiticity_residual", d.max_hermiticity_residual},
                    {"min_eigenvalue", d.min_eigenvalue},
                    {"eigen_check_times", d.eigen_check_times},
                    {"final_purity", d.purity.empty() ? 1.0 : d.purity.back()},
                    {"nbar", lindblad::bath_occupation(s.oscillator)}});

    TimeSeries series{result.times, result.mean_q(), {}};
    const bool cat = std::holds_alternative<CatSpec>(s.state);
    ctx.write_json("echo_report", "echoes.json",
                   echo_report(series, analysis::carrier_frequency(chi, q0), quantum_windows(s, q0, cat)));
}

void run_revivals(const Scenario& s, RunContext& ctx) {
    const double chi = s.oscillator.chi;
    const cplx alpha0 = initial_alpha(s.state);
    const auto ops = quantum::build_operators(chi, s.fock);
    const auto psi0 = quantum::coherent_state_vector(alpha0, s.fock);
    json summary = json::array();
    for (int nu : s.revival.nu_values) {
        const auto dec = quantum::fractional_revival_decomposition(alpha0, chi, nu);
        std::vector<std::vector<double>> rows;
        for (int k = 0; k < nu; ++k) {
            const cplx c = dec.coefficients[static_cast<std::size_t>(k)];
            const cplx a = dec.amplitudes[static_cast<std::size_t>(k)];
            const cplx closed = nu % 2 == 1 ? quantum::gauss_sum_closed_form(nu, k) : cplx(NAN, NAN);
            rows.push_back({static_cast<double>(k), c.real(), c.imag(), std::abs(c), closed.real(), closed.imag(),
                            a.real(), a.imag()});
        }
        const std::string name = "revival_nu" + std::to_string(nu) + ".csv";
        write_csv(ctx.add("revival_nu" + std::to_string(nu), name),
                  {"k", "re_c", "im_c", "abs_c", "re_c_closed", "im_c_closed", "re_alpha", "im_alpha"}, rows);
        const double fid = quantum::fidelity(quantum::evolve_free(psi0, ops, dec.time),
                                             dec.superposition().to_fock(s.fock));
        json entry{{"nu", nu}, {"time", dec.time}, {"fidelity", fid}};
        if (nu % 4 == 3) {
            json rule = json::array();
            for (int r = -3; r <= 3; ++r) rule.push_back({{"r_star", r}, {"l", quantum::selection_rule(nu, r)}});
            entry["selection_rule"] = rule;
        }
        summary.push_back(entry);
    }
    ctx.write_json("summary", "revivals.json", {{"decompositions", summary}});
}

void run_oracles(const Scenario& s, RunContext& ctx) {
    json checks = json::array();
    bool all_ok = true;
    auto record = [&](const std::string& name, double deviation, double tolerance) {
        const bool ok = deviation < tolerance;
        all_ok = all_ok && ok;
        checks.push_back({{"name", name}, {"deviation", deviation}, {"tolerance", tolerance}, {"pass", ok}});
        std::cout << (ok ? "ok    " : "FAIL  ") << name << "  deviation=" << deviation << "  tol=" << tolerance
                  << "\n";
    };
    const double chi = s.oscillator.chi;
    const cplx alpha0 = initial_alpha(s.state);
    const auto ops = quantum::build_operators(chi, s.fock);

    {
        const auto psi = quantum::coherent_state_vector(alpha0, s.fock);
        double dev = 0.0;
        for (int i = 0; i <= 200; ++i) {
            const double t = 2.0 * std::numbers::pi * i / 200.0 / chi;
            const double num = quantum::expectation_q(quantum::evolve_free(psi, ops, t));
            const double ana = std::sqrt(2.0) * quantum::analytic_mean_a_coherent(alpha0, chi, t).real();
            dev = std::max(dev, std::abs(num - ana));
        }
        record("free coherent <q> vs closed form", dev, 1e-8);
    }
    {
        const CatSpec cat{alpha0, std::sqrt(0.8), std::sqrt(0.2), std::numbers::pi / 2};
        const auto psi = quantum::cat_state_vector(cat, s.fock);
        double dev = 0.0;
        for (int i = 0; i <= 200; ++i) {
            const double t = std::numbers::pi * i / 200.0 / chi;
            const double num = quantum::expectation_q(quantum::evolve_free(psi, ops, t));
            const double ana = std::sqrt(2.0) * quantum::analytic_mean_a_cat(cat, chi, t).real();
            dev = std::max(dev, std::abs(num - ana));
        }
        record("free cat <q> vs closed form", dev, 1e-8);
    }
    {
        double dev = 0.0;
        for (int nu = 1; nu <= 23; nu += 2) {
            for (int k = 0; k < nu; ++k) {
                dev = std::max(dev, std::abs(quantum::gauss_sum_closed_form(nu, k) - quantum::gauss_sum_direct(nu, k)));
            }
        }
        record("Gauss sum closed form vs direct sum", dev, 1e-12);
    }
    {
        const auto psi = quantum::coherent_state_vector(alpha0, s.fock);
        double worst = 0.0;
        for (int nu : s.revival.nu_values) {
            const auto dec = quantum::fractional_revival_decomposition(alpha0, chi, nu);
            const double fid = quantum::fidelity(quantum::evolve_free(psi, ops, dec.time),
                                                 dec.superposition().to_fock(s.fock));
            worst = std::max(worst, 1.0 - fid);
        }
        record("fractional revival decomposition fidelity deficit", worst, 1e-10);
    }
    {
        // damped coherent state at alpha0 = 2 keeps the check quick
        const cplx a2{2.0, 0.0};
        const FockSpaceSpec fock{default_cutoff(2.0)};
        const auto ops2 = quantum::build_operators(chi, fock);
        OscillatorParams damped{chi, 0.03, std::nullopt};
        const TimeGrid grid{0.0, std::numbers::pi, 0.01};
        const auto run = lindblad::propagate_density(
            lindblad::pure_density(quantum::coherent_state_vector(a2, fock)), ops2, damped, std::nullopt, grid);
        double dev = 0.0;
        for (std::size_t i = 0; i < run.times.size(); ++i) {
            const cplx ana = lindblad::damped_mean_a_analytic(CoherentSpec{a2}, damped, run.times[i]);
            dev = std::max(dev, std::sqrt(2.0) * std::abs(run.mean_a[i].real() - ana.real()));
        }
        record("damped coherent <q> vs zero-temperature solution", dev, 1e-4);
    }
    ctx.write_json("oracles", "oracles.json", {{"checks", checks}, {"all_pass", all_ok}});
    if (!all_ok) throw EngineFailure("one or more oracle checks failed");
}

using Runner = std::function<void(const Scenario&, RunContext&)>;

int execute(const std::string& name, const CommonOptions& opts, bool config_required, const Runner& runner) {
    RunContext ctx(name, opts);
    std::optional<Scenario> scenario;
    const auto start = std::chrono::steady_clock::now();
    bool dir_ready = false;
    try {
        try {
            scenario = resolve_scenario(opts, config_required);
        } catch (const ConfigError& e) {
            std::cerr << "kerr-echo " << name << ": invalid configuration\n" << e.what() << "\n";
            return kValidation;
        }
        prepare_out_dir(opts, ctx);
        dir_ready = true;
        {
            std::ofstream out(ctx.side_file("scenario.resolved.ini"));
            out << to_scenario_text(*scenario);
        }
        runner(*scenario, ctx);
        ctx.time("total", seconds_since(start));
        ctx.write_index();
        ctx.write_manifest(scenario, "ok", "");
        return kOk;
    } catch (const ValidationFailure& e) {
        std::cerr << "kerr-echo " << name << ": " << e.what() << "\n";
        if (dir_ready) ctx.write_manifest(scenario, "invalid", e.what());
        return kValidation;
    } catch (const InvalidParameter& e) {
        std::cerr << "kerr-echo " << name << ": " << e.what() << "\n";
        if (dir_ready) ctx.write_manifest(scenario, "invalid", e.what());
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "kerr-echo " << name << ": " << e.what() << "\n";
        if (dir_ready) {
            try {
                ctx.time("total", seconds_since(start));
                ctx.write_index();
                ctx.write_manifest(scenario, "failed", e.what());
            } catch (...) {
            }
        }
        return kEngine;
    }
}

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required) {
    auto* cfg = cmd->add_option("-c,--config", opts.config, "Scenario file (INI) or a previous manifest.json")
                    ->envname("KERR_ECHO_CONFIG");
    if (config_required) cfg->required();
    cmd->add_option("-o,--out", opts.out, "Output directory")->required()->envname("KERR_ECHO_OUT");
    cmd->add_option("--seed", opts.seed, "Master seed (overrides ensemble.seed)")->envname("KERR_ECHO_SEED");
    cmd->add_flag("--force", opts.force, "Overwrite a non-empty output directory")->envname("KERR_ECHO_FORCE");
    cmd->add_flag("--long", opts.long_run, "Allow long-running configurations")->envname("KERR_ECHO_LONG");
    cmd->add_option("--set", opts.overrides, "Override a key, e.g. --set pulse.g0=0.02")->take_all();
    cmd->add_option("--threads", opts.threads, "Worker threads")->check(CLI::PositiveNumber)->envname("KERR_ECHO_THREADS");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Classical and quantum echoes in a kicked Kerr oscillator"};
    app.set_version_flag("--version", KERR_ECHO_VERSION);
    app.require_subcommand(1, 1);

    struct Command {
        const char* name;
        const char* help;
        bool config_required;
        Runner runner;
    };
    const std::vector<Command> commands{
        {"classical-ensemble", "Monte Carlo ensemble: <q(t)>, phase-space snapshots, echo report", true, run_classical},
        {"quantum-evolve", "Fock-space propagation of a coherent or cat state", true,
         [](const Scenario& s, RunContext& c) { run_quantum(s, c, false); }},
        {"cat-evolve", "Fock-space propagation of a cat state", true,
         [](const Scenario& s, RunContext& c) { run_quantum(s, c, true); }},
        {"echo-sweep", "First classical and quantum echo amplitudes over (N+^2, theta)", true, run_sweep},
        {"lindblad-evolve", "Density-matrix propagation with damping and a thermal bath", true, run_lindblad},
        {"revival-decompose", "Fractional-revival coefficients and selection rules", true, run_revivals},
        {"oracle-check", "Closed forms against numerical propagation", false, run_oracles},
    };
    CommonOptions opts;
    std::vector<CLI::App*> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, opts, c.config_required);
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }
    for (std::size_t i = 0; i < commands.size(); ++i) {
        if (subs[i]->parsed()) return execute(commands[i].name, opts, commands[i].config_required, commands[i].runner);
    }
    return kUsage;
}
