#pragma once

#include <complex>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace kerr {

/// Sampled real observable with optional per-sample standard error.
struct TimeSeries {
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> stderrs;  // empty when not applicable

    std::size_t size() const { return times.size(); }
    bool has_stderr() const { return !stderrs.empty(); }

    /// Throws std::invalid_argument unless times are strictly increasing and lengths match.
    void check() const;

    double max_abs() const;
};

/// Shortest round-trip decimal representation, independent of the C++ locale.
std::string format_number(double v);

/// Writes a CSV file. Every row must have header.size() entries.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

/// `t,mean_q,stderr`
void write_mean_q_csv(const std::filesystem::path& path, const TimeSeries& series);

/// `t,mean_q,re_a,im_a`
void write_expectation_csv(const std::filesystem::path& path, const std::vector<double>& times,
                           const std::vector<std::complex<double>>& mean_a);

}  // namespace kerr
