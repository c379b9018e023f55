#include "kerr/scenario_io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace kerr {

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "oscillator.chi",    "oscillator.gamma",   "oscillator.epsilon",
        "pulse.g0",          "pulse.tau",          "pulse.sigma_g",
        "pulse.shape",       "state.kind",         "state.alpha_re",
        "state.alpha_im",    "state.n_plus",       "state.n_minus",
        "state.theta",       "grid.t_start",       "grid.t_end",
        "grid.dt_out",       "grid.dt_pulse",      "grid.dt_free",
        "ensemble.n_samples", "ensemble.seed",     "fock.n_max",
        "sweep.theta_values", "sweep.n_plus_values", "revival.nu_values",
    };
    return keys;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Reads typed values out of a RawConfig, recording failures instead of throwing.
class Reader {
public:
    explicit Reader(const RawConfig& raw) : raw_(raw) {}

    bool has(const std::string& key) const { return raw_.count(key) != 0; }

    double number(const std::string& key, double fallback) {
        const auto it = raw_.find(key);
        if (it == raw_.end()) return fallback;
        double v = 0.0;
        const std::string s = trim(it->second);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
            fail(key, "not a number: '" + it->second + "'");
            return fallback;
        }
        if (!std::isfinite(v)) fail(key, "must be finite");
        return v;
    }

    std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
        const auto it = raw_.find(key);
        if (it == raw_.end()) return fallback;
        std::uint64_t v = 0;
        const std::string s = trim(it->second);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
            fail(key, "not a non-negative integer: '" + it->second + "'");
            return fallback;
        }
        return v;
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        const auto it = raw_.find(key);
        return it == raw_.end() ? fallback : trim(it->second);
    }

    std::vector<double> number_list(const std::string& key) {
        std::vector<double> out;
        const auto it = raw_.find(key);
        if (it == raw_.end()) return out;
        std::stringstream ss(it->second);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string s = trim(item);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
                fail(key, "bad list entry '" + item + "'");
                continue;
            }
            out.push_back(v);
        }
        return out;
    }

    void fail(const std::string& path, std::string message) {
        errors.push_back({path, std::move(message)});
    }

    std::vector<FieldError> errors;

private:
    const RawConfig& raw_;
};

std::string join_numbers(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += format_double(values[i]);
    }
    return out;
}

}  // namespace

ConfigError::ConfigError(std::vector<FieldError> errors)
    : std::runtime_error([&] {
          std::string msg = "invalid scenario:";
          for (const auto& e : errors) msg += "\n  " + e.path + ": " + e.message;
          return msg;
      }()),
      errors_(std::move(errors)) {}

RawConfig parse_scenario_text(std::string_view text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in{std::string(text)};
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError({{"<document>", "line " + std::to_string(e.line()) + ": " + e.message()}});
    }
    RawConfig raw;
    std::vector<FieldError> errors;
    for (const auto& [section, body] : tree) {
        if (body.empty()) {
            errors.push_back({section, "key outside of a section"});
            continue;
        }
        for (const auto& [key, value] : body) {
            raw[section + "." + key] = value.get_value<std::string>();
        }
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return raw;
}

RawConfig load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({{path.string(), "cannot open scenario file"}});
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_text(buf.str());
}

void apply_override(RawConfig& raw, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ConfigError({{std::string(assignment), "override must look like section.key=value"}});
    }
    const std::string key = trim(assignment.substr(0, eq));
    if (key.find('.') == std::string::npos) {
        throw ConfigError({{key, "override key must be a dotted path"}});
    }
    raw[key] = trim(assignment.substr(eq + 1));
}

Scenario validate_config(const RawConfig& raw) {
    Reader r(raw);
    for (const auto& [key, value] : raw) {
        if (!known_keys().count(key)) r.fail(key, "unknown key");
    }

    Scenario s;
    auto& osc = s.oscillator;
    osc.chi = r.number("oscillator.chi", 1.0);
    osc.gamma = r.number("oscillator.gamma", 0.0);
    if (r.has("oscillator.epsilon")) osc.epsilon = r.number("oscillator.epsilon", 1.0);
    if (osc.chi < 0.0) r.fail("oscillator.chi", "must be >= 0");
    if (osc.gamma < 0.0) r.fail("oscillator.gamma", "must be >= 0");
    if (osc.epsilon && !(*osc.epsilon > 0.0)) r.fail("oscillator.epsilon", "must be > 0");

    const bool any_pulse = r.has("pulse.g0") || r.has("pulse.tau") || r.has("pulse.sigma_g") ||
                           r.has("pulse.shape");
    if (any_pulse) {
        KickPulse p;
        if (!r.has("pulse.g0")) r.fail("pulse.g0", "required when a pulse is given");
        if (!r.has("pulse.tau")) r.fail("pulse.tau", "required when a pulse is given");
        p.g0 = r.number("pulse.g0", 0.0);
        p.tau = r.number("pulse.tau", 1.0);
        p.sigma_g = r.number("pulse.sigma_g", kDefaultSigmaG);
        const std::string shape = r.text("pulse.shape", "gaussian");
        if (shape == "gaussian") {
            p.shape = PulseShape::gaussian;
        } else if (shape == "square") {
            p.shape = PulseShape::square;
        } else {
            r.fail("pulse.shape", "expected 'gaussian' or 'square', got '" + shape + "'");
        }
        if (!(p.tau > 0.0)) r.fail("pulse.tau", "must be > 0");
        if (!(p.sigma_g > 0.0)) {
            r.fail("pulse.sigma_g", "must be > 0");
        } else if (!(p.sigma_g < p.tau / 10.0)) {
            r.fail("pulse.sigma_g", "pulse not impulsive: sigma_g must be < tau/10");
        }
        s.pulse = p;
    }

    const cplx alpha{r.number("state.alpha_re", 0.0), r.number("state.alpha_im", 0.0)};
    const std::string kind = r.text("state.kind", "coherent");
    if (kind == "coherent") {
        for (const char* k : {"state.n_plus", "state.n_minus", "state.theta"}) {
            if (r.has(k)) r.fail(k, "only valid for state.kind = cat");
        }
        s.state = CoherentSpec{alpha};
    } else if (kind == "cat") {
        CatSpec cat;
        cat.alpha0 = alpha;
        cat.n_plus = r.number("state.n_plus", 1.0);
        cat.n_minus = r.number("state.n_minus", 0.0);
        cat.theta = r.number("state.theta", 0.0);
        if (cat.n_plus < 0.0) r.fail("state.n_plus", "must be >= 0");
        if (cat.n_minus < 0.0) r.fail("state.n_minus", "must be >= 0");
        if (!(cat.norm_squared() > 0.0)) r.fail("state", "cat state is not normalisable");
        s.state = cat;
    } else {
        r.fail("state.kind", "expected 'coherent' or 'cat', got '" + kind + "'");
    }

    s.grid.t_start = r.number("grid.t_start", 0.0);
    s.grid.t_end = r.number("grid.t_end", 1.0);
    s.grid.dt_out = r.number("grid.dt_out", 1e-3);
    s.steps.dt_pulse = r.number("grid.dt_pulse", 1e-5);
    s.steps.dt_free = r.number("grid.dt_free", 1e-4);
    if (!(s.grid.t_start < s.grid.t_end)) r.fail("grid.t_end", "must exceed grid.t_start");
    if (!(s.grid.dt_out > 0.0)) r.fail("grid.dt_out", "must be > 0");
    if (!(s.steps.dt_pulse > 0.0)) r.fail("grid.dt_pulse", "must be > 0");
    if (!(s.steps.dt_free > 0.0)) r.fail("grid.dt_free", "must be > 0");

    s.ensemble.n_samples = r.integer("ensemble.n_samples", kDefaultSamples);
    s.ensemble.seed = r.integer("ensemble.seed", 0);
    if (s.ensemble.n_samples < 1) r.fail("ensemble.n_samples", "must be >= 1");

    const double alpha_abs = std::abs(alpha);
    s.fock.n_max = r.has("fock.n_max") ? r.integer("fock.n_max", 0)
                                       : (std::isfinite(alpha_abs) ? default_cutoff(alpha_abs) : 2);
    if (s.fock.n_max < 2) {
        r.fail("fock.n_max", "must be >= 2");
    } else if (std::isfinite(alpha_abs) && coherent_tail_weight(alpha_abs, s.fock.n_max) >= kTailTolerance) {
        r.fail("fock.n_max", "truncated weight of the initial state exceeds 1e-12; need n_max >= " +
                                 std::to_string(default_cutoff(alpha_abs)));
    }

    s.sweep.theta_values = r.number_list("sweep.theta_values");
    s.sweep.n_plus_values = r.number_list("sweep.n_plus_values");
    for (double v : s.sweep.n_plus_values) {
        if (v < 0.0 || v > 1.0) r.fail("sweep.n_plus_values", "entries must lie in [0, 1]");
    }
    if (r.has("revival.nu_values")) {
        s.revival.nu_values.clear();
        for (double v : r.number_list("revival.nu_values")) {
            if (v != std::floor(v) || v < 2.0) {
                r.fail("revival.nu_values", "entries must be integers >= 2");
                continue;
            }
            s.revival.nu_values.push_back(static_cast<int>(v));
        }
    }

    if (!r.errors.empty()) throw ConfigError(std::move(r.errors));
    return s;
}

RawConfig to_raw(const Scenario& s) {
    RawConfig raw;
    raw["oscillator.chi"] = format_double(s.oscillator.chi);
    raw["oscillator.gamma"] = format_double(s.oscillator.gamma);
    if (s.oscillator.epsilon) raw["oscillator.epsilon"] = format_double(*s.oscillator.epsilon);
    if (s.pulse) {
        raw["pulse.g0"] = format_double(s.pulse->g0);
        raw["pulse.tau"] = format_double(s.pulse->tau);
        raw["pulse.sigma_g"] = format_double(s.pulse->sigma_g);
        raw["pulse.shape"] = s.pulse->shape == PulseShape::square ? "square" : "gaussian";
    }
    const cplx alpha = initial_alpha(s.state);
    raw["state.alpha_re"] = format_double(alpha.real());
    raw["state.alpha_im"] = format_double(alpha.imag());
    if (const auto* cat = std::get_if<CatSpec>(&s.state)) {
        raw["state.kind"] = "cat";
        raw["state.n_plus"] = format_double(cat->n_plus);
        raw["state.n_minus"] = format_double(cat->n_minus);
        raw["state.theta"] = format_double(cat->theta);
    } else {
        raw["state.kind"] = "coherent";
    }
    raw["grid.t_start"] = format_double(s.grid.t_start);
    raw["grid.t_end"] = format_double(s.grid.t_end);
    raw["grid.dt_out"] = format_double(s.grid.dt_out);
    raw["grid.dt_pulse"] = format_double(s.steps.dt_pulse);
    raw["grid.dt_free"] = format_double(s.steps.dt_free);
    raw["ensemble.n_samples"] = std::to_string(s.ensemble.n_samples);
    raw["ensemble.seed"] = std::to_string(s.ensemble.seed);
    raw["fock.n_max"] = std::to_string(s.fock.n_max);
    if (!s.sweep.theta_values.empty()) raw["sweep.theta_values"] = join_numbers(s.sweep.theta_values);
    if (!s.sweep.n_plus_values.empty()) raw["sweep.n_plus_values"] = join_numbers(s.sweep.n_plus_values);
    std::vector<double> nus(s.revival.nu_values.begin(), s.revival.nu_values.end());
    raw["revival.nu_values"] = join_numbers(nus);
    return raw;
}

std::string to_scenario_text(const Scenario& scenario) {
    const RawConfig raw = to_raw(scenario);
    std::string out;
    std::string current;
    // RawConfig is ordered, so keys of one section are contiguous
    for (const auto& [key, value] : raw) {
        const auto dot = key.find('.');
        const std::string section = key.substr(0, dot);
        if (section != current) {
            if (!current.empty()) out += "\n";
            out += "[" + section + "]\n";
            current = section;
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

std::string scenario_hash(const Scenario& scenario) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : to_scenario_text(scenario)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace kerr
