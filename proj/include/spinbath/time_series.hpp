#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"

namespace spinbath {

/// Provenance attached to a magnetisation series.
struct SeriesMeta {
    int N = 0;
    int L = 0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::string coupling_mode = "uniform";
};

/// Sampled expectation values <S^z_sys(t)> on an ascending time grid.
struct TimeSeries {
    std::vector<double> times;
    std::vector<double> values;
    SeriesMeta meta;

    std::size_t size() const noexcept { return times.size(); }
    bool empty() const noexcept { return times.empty(); }
};

/// times[k] = k * spacing, k = 0..count-1.
inline std::vector<double> uniform_grid(double spacing, std::size_t count)
{
    std::vector<double> t(count);
    for (std::size_t k = 0; k < count; ++k) { t[k] = static_cast<double>(k) * spacing; }
    return t;
}

/// `count` points from lo to hi with a constant ratio.
inline std::vector<double> geometric_grid(double lo, double hi, std::size_t count)
{
    if (count < 2 || !(lo > 0.0) || !(hi > lo)) { throw ConfigError("geometric_grid: bad range"); }
    std::vector<double> g(count);
    for (std::size_t i = 0; i < count; ++i) {
        g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1));
    }
    return g;
}

} // namespace spinbath
