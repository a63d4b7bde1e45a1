#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "calibration.hpp"
#include "errors.hpp"
#include "lattice.hpp"
#include "series.hpp"
#include "skew_walk.hpp"

namespace skewtree {

struct LoadedSeries {
    PriceSeries series;
    std::vector<std::string> warnings; // dropped rows
    std::vector<std::string> notices;  // normalizations such as sorting
};

namespace detail {

inline std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    const auto e = s.find_last_not_of(ws);
    s.erase(e == std::string::npos ? 0 : e + 1);
    return s;
}

inline bool parse_double(const std::string& text, double& out) {
    if (text.empty()) return false;
    try {
        std::size_t used = 0;
        out = std::stod(text, &used);
        return used == text.size();
    } catch (...) {
        return false;
    }
}

} // namespace detail

/// Reads a `date,price` CSV. Rows with a missing, unparsable, non-finite or
/// non-positive price are dropped with a warning; unsorted rows are sorted with
/// a notice; duplicate dates are rejected.
inline LoadedSeries load_price_csv(const std::string& path, double dt = 1.0 / 252.0) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open price file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("price file is empty: " + path);
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3); // UTF-8 BOM
    std::string header = detail::trim(line);
    std::transform(header.begin(), header.end(), header.begin(), [](unsigned char c) { return std::tolower(c); });
    header.erase(std::remove(header.begin(), header.end(), ' '), header.end());
    if (header != "date,price") throw DataError("price file header must be `date,price`, got `" + detail::trim(line) + "`");

    LoadedSeries out;
    std::vector<std::pair<std::string, double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty()) continue;
        const auto comma = t.find(',');
        const std::string date = detail::trim(t.substr(0, comma));
        const std::string price_text = comma == std::string::npos ? "" : detail::trim(t.substr(comma + 1));
        double price = 0.0;
        if (date.empty()) {
            out.warnings.push_back("line " + std::to_string(line_no) + ": missing date, row dropped");
            continue;
        }
        if (!detail::parse_double(price_text, price) || !std::isfinite(price)) {
            out.warnings.push_back("line " + std::to_string(line_no) + " (" + date + "): missing or invalid price, row dropped");
            continue;
        }
        if (price <= 0.0) {
            out.warnings.push_back("line " + std::to_string(line_no) + " (" + date + "): non-positive price, row dropped");
            continue;
        }
        rows.emplace_back(date, price);
    }
    if (!std::is_sorted(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; })) {
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        out.notices.push_back("rows were not in date order and have been sorted ascending");
    }
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].first == rows[i - 1].first) throw DataError("duplicate date in price file: " + rows[i].first);
    if (rows.size() < 2) throw DataError("price file has fewer than 2 valid rows: " + path);
    out.series.dt = dt;
    for (auto& [d, p] : rows) {
        out.series.dates.push_back(d);
        out.series.prices.push_back(p);
    }
    out.series.validate();
    return out;
}

/// Fixed 10-significant-digit formatting; NaN becomes an empty field.
inline std::string format_number(double x) {
    if (std::isnan(x)) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
        if (c == '"') q += '"';
        q += c;
    }
    return q + "\"";
}

/// Writes the whole text at once so that a failure leaves no partial file.
inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open output file: " + path);
    out << text;
    if (!out) throw DataError("failed writing output file: " + path);
}

} // namespace detail

inline std::string surface_csv(const Surface& sf) {
    if (sf.cells.empty()) throw std::invalid_argument("surface grid is empty");
    std::ostringstream os;
    os << "T_days,moneyness,strike,price,warnings\n";
    for (const auto& c : sf.cells)
        os << c.t_days << ',' << format_number(c.moneyness) << ',' << format_number(c.strike) << ','
           << format_number(c.price) << ',' << detail::csv_field(c.warnings) << '\n';
    return os.str();
}

inline void write_surface_csv(const Surface& sf, const std::string& path) {
    detail::write_text(path, surface_csv(sf));
}

inline std::string calibration_csv(const RollingCalibration& rc) {
    if (rc.dates.empty()) throw std::invalid_argument("rolling calibration is empty");
    std::ostringstream os;
    os << "date,sigma_hat,sigma_star,mu_hat,alpha_hat,mse,mu_med,alpha_med\n";
    for (std::size_t i = 0; i < rc.dates.size(); ++i)
        os << detail::csv_field(rc.dates[i]) << ',' << format_number(rc.sigma_hat[i]) << ','
           << format_number(rc.sigma_star[i]) << ',' << format_number(rc.mu_hat[i]) << ','
           << format_number(rc.alpha_hat[i]) << ',' << format_number(rc.mse[i]) << ','
           << format_number(rc.mu_med[i]) << ',' << format_number(rc.alpha_med[i]) << '\n';
    return os.str();
}

inline void write_calibration_csv(const RollingCalibration& rc, const std::string& path) {
    detail::write_text(path, calibration_csv(rc));
}

inline void write_delta_csv(const DeltaSeries& ds, const std::string& path) {
    if (ds.dates.empty()) throw std::invalid_argument("delta series is empty");
    std::ostringstream os;
    os << "date,alpha_med,delta\n";
    for (std::size_t i = 0; i < ds.dates.size(); ++i)
        os << detail::csv_field(ds.dates[i]) << ',' << format_number(ds.alpha_med[i]) << ','
           << format_number(ds.delta[i]) << '\n';
    detail::write_text(path, os.str());
}

inline void write_price_csv(const PriceSeries& s, const std::string& path) {
    s.validate();
    std::ostringstream os;
    os << "date,price\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        os << (s.dates.empty() ? std::to_string(i) : s.dates[i]) << ',' << format_number(s.prices[i]) << '\n';
    detail::write_text(path, os.str());
}

inline void write_moment_report_csv(const EnsembleMomentReport& r, const std::string& path) {
    if (r.empirical_mean.empty()) throw std::invalid_argument("moment report is empty");
    std::ostringstream os;
    os << "k,empirical_mean,theoretical_mean,empirical_std,theoretical_std,"
          "empirical_dmean,theoretical_dmean,empirical_dstd,theoretical_dstd\n";
    for (std::size_t k = 0; k < r.empirical_mean.size(); ++k)
        os << k + 1 << ',' << format_number(r.empirical_mean[k]) << ',' << format_number(r.theoretical_mean[k]) << ','
           << format_number(r.empirical_std[k]) << ',' << format_number(r.theoretical_std[k]) << ','
           << format_number(r.empirical_dmean[k]) << ',' << format_number(r.theoretical_dmean[k]) << ','
           << format_number(r.empirical_dstd[k]) << ',' << format_number(r.theoretical_dstd[k]) << '\n';
    detail::write_text(path, os.str());
}

inline void write_histogram_csv(const ZeroOccurrenceStats& z, const std::string& path) {
    if (z.bin_lower.empty()) throw std::invalid_argument("histogram is empty");
    std::ostringstream os;
    os << "bin_lower_percent,relative_frequency\n";
    for (std::size_t b = 0; b < z.bin_lower.size(); ++b)
        os << format_number(z.bin_lower[b]) << ',' << format_number(z.relative_frequency[b]) << '\n';
    detail::write_text(path, os.str());
}

} // namespace skewtree
