#include "kerr/time_series.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace kerr {

void TimeSeries::check() const {
    if (values.size() != times.size()) throw std::invalid_argument("TimeSeries: length mismatch");
    if (!stderrs.empty() && stderrs.size() != times.size()) {
        throw std::invalid_argument("TimeSeries: stderr length mismatch");
    }
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (!(times[i] > times[i - 1])) {
            throw std::invalid_argument("TimeSeries: times must be strictly increasing");
        }
    }
}

double TimeSeries::max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
}

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw std::invalid_argument("write_csv: ragged row");
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_mean_q_csv(const std::filesystem::path& path, const TimeSeries& series) {
    std::vector<std::vector<double>> rows;
    rows.reserve(series.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        rows.push_back({series.times[i], series.values[i], series.has_stderr() ? series.stderrs[i] : 0.0});
    }
    write_csv(path, {"t", "mean_q", "stderr"}, rows);
}

void write_expectation_csv(const std::filesystem::path& path, const std::vector<double>& times,
                           const std::vector<std::complex<double>>& mean_a) {
    std::vector<std::vector<double>> rows;
    rows.reserve(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        rows.push_back({times[i], std::sqrt(2.0) * mean_a[i].real(), mean_a[i].real(), mean_a[i].imag()});
    }
    write_csv(path, {"t", "mean_q", "re_a", "im_a"}, rows);
}

}  // namespace kerr
