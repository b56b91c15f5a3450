#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "time_series.hpp"

namespace spinbath {

/// Shortest text that parses back to the same double; "nan"/"inf" otherwise.
inline std::string format_double(double x)
{
    if (std::isnan(x)) { return "nan"; }
    if (std::isinf(x)) { return x > 0 ? "inf" : "-inf"; }
    char buf[64];
    auto const r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s)
{
    double v = 0.0;
    if (s == "nan") { return std::nan(""); }
    if (s == "inf") { return HUGE_VAL; }
    if (s == "-inf") { return -HUGE_VAL; }
    auto const r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) {
        throw ConfigError("csv: cannot parse number '" + std::string(s) + "'");
    }
    return v;
}

inline std::vector<std::string> split(std::string const& line, char sep = ',')
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, sep)) { out.push_back(cell); }
    if (!line.empty() && line.back() == sep) { out.emplace_back(); }
    return out;
}

/// Writes to a temporary sibling and renames it into place.
inline void write_file_atomic(std::filesystem::path const& path, std::string const& content)
{
    if (path.has_parent_path()) { std::filesystem::create_directories(path.parent_path()); }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) { throw Error("cannot open " + tmp.string()); }
        os << content;
        if (!os) { throw Error("write failed for " + tmp.string()); }
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(std::filesystem::path const& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) { throw ConfigError("cannot open " + path.string()); }
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

/// One line per run in the sweep summary.
struct SummaryRow {
    int N = 0;
    int L = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::string coupling_mode = "uniform";
    double longtime_avg = std::nan("");
    double tau_rel = std::nan("");
    bool censored = false;
    double fit_residual = std::nan("");
    std::string regime = "failed";
    std::string config_hash;

    static constexpr char const* header =
        "N,L,lambda,seed,coupling_mode,longtime_avg,tau_rel,censored,fit_residual,regime,config_hash";

    std::string to_csv() const
    {
        std::ostringstream os;
        os << N << ',' << L << ',' << format_double(lambda) << ',' << seed << ',' << coupling_mode << ','
           << format_double(longtime_avg) << ',' << format_double(tau_rel) << ',' << (censored ? 1 : 0) << ','
           << format_double(fit_residual) << ',' << regime << ',' << config_hash;
        return os.str();
    }

    static SummaryRow from_csv(std::string const& line)
    {
        auto const c = split(line);
        if (c.size() != 11) { throw ConfigError("summary csv: expected 11 columns in '" + line + "'"); }
        SummaryRow r;
        try {
            r.N = std::stoi(c[0]);
            r.L = std::stoi(c[1]);
            r.seed = std::stoull(c[3]);
        }
        catch (std::exception const&) {
            throw ConfigError("summary csv: malformed row '" + line + "'");
        }
        r.lambda = parse_double(c[2]);
        r.coupling_mode = c[4];
        r.longtime_avg = parse_double(c[5]);
        r.tau_rel = parse_double(c[6]);
        r.censored = c[7] == "1";
        r.fit_residual = parse_double(c[8]);
        r.regime = c[9];
        r.config_hash = c[10];
        return r;
    }
};

/// Data rows of a summary CSV; stops at the first blank or comment line, which
/// opens the footer blocks.
inline std::vector<SummaryRow> read_summary_rows(std::filesystem::path const& path)
{
    std::ifstream is(path);
    if (!is) { throw ConfigError("cannot open " + path.string()); }
    std::string line;
    if (!std::getline(is, line) || line != SummaryRow::header) {
        throw ConfigError("summary csv: unexpected header in " + path.string());
    }
    std::vector<SummaryRow> rows;
    while (std::getline(is, line)) {
        if (line.empty() || line.front() == '#') { break; }
        rows.push_back(SummaryRow::from_csv(line));
    }
    return rows;
}

inline std::string series_csv(TimeSeries const& s, std::string const& config_hash)
{
    std::ostringstream os;
    os << "# N=" << s.meta.N << ",L=" << s.meta.L << ",lambda=" << format_double(s.meta.lambda)
       << ",seed=" << s.meta.seed << ",coupling_mode=" << s.meta.coupling_mode << ",config_hash=" << config_hash
       << '\n';
    os << "t,sz_sys\n";
    for (std::size_t k = 0; k < s.size(); ++k) {
        os << format_double(s.times[k]) << ',' << format_double(s.values[k]) << '\n';
    }
    return os.str();
}

inline TimeSeries read_series_csv(std::filesystem::path const& path)
{
    std::ifstream is(path);
    if (!is) { throw ConfigError("cannot open " + path.string()); }
    TimeSeries s;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) { continue; }
        if (line.front() == '#') {
            for (auto const& kv : split(line.substr(2))) {
                auto const eq = kv.find('=');
                if (eq == std::string::npos) { continue; }
                auto const key = kv.substr(0, eq);
                auto const val = kv.substr(eq + 1);
                if (key == "N") { s.meta.N = std::stoi(val); }
                else if (key == "L") { s.meta.L = std::stoi(val); }
                else if (key == "lambda") { s.meta.lambda = parse_double(val); }
                else if (key == "seed") { s.meta.seed = std::stoull(val); }
                else if (key == "coupling_mode") { s.meta.coupling_mode = val; }
            }
            continue;
        }
        if (line == "t,sz_sys") { continue; }
        auto const c = split(line);
        if (c.size() != 2) { throw ConfigError("series csv: malformed row '" + line + "'"); }
        s.times.push_back(parse_double(c[0]));
        s.values.push_back(parse_double(c[1]));
    }
    return s;
}

} // namespace spinbath
