#pragma once

#include "kerr/model.hpp"

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kerr {

/// Flat "section.key" -> value view of a scenario document.
using RawConfig = std::map<std::string, std::string>;

struct FieldError {
    std::string path;
    std::string message;
};

/// Aggregated validation failure; what() lists every violated field.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<FieldError> errors);
    const std::vector<FieldError>& errors() const { return errors_; }

private:
    std::vector<FieldError> errors_;
};

/// Parses an INI-style document:
///
///     [oscillator]
///     chi = 1
///     [pulse]
///     g0 = 0.01
///
/// Comments start with '#' or ';'. Throws ConfigError on syntax errors.
RawConfig parse_scenario_text(std::string_view text);

/// Reads and parses a scenario file. A missing file is reported with its path.
RawConfig load_scenario_file(const std::filesystem::path& path);

/// Applies a "section.key=value" override.
void apply_override(RawConfig& raw, std::string_view assignment);

/// Checks every invariant, fills defaults and rejects unknown keys.
Scenario validate_config(const RawConfig& raw);

/// Inverse of validate_config: validate_config(to_raw(s)) == s.
RawConfig to_raw(const Scenario& scenario);

/// Canonical INI rendering of a resolved scenario.
std::string to_scenario_text(const Scenario& scenario);

/// FNV-1a hash of the canonical rendering, as 16 hex digits.
std::string scenario_hash(const Scenario& scenario);

}  // namespace kerr
