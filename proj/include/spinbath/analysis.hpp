#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "time_series.hpp"

namespace spinbath {

struct AnalysisOptions {
    double tail_fraction = 0.5;
    std::size_t min_tail_samples = 100;
    double threshold = -0.04;
    double lambda_non_markovian = 0.3;
    double fit_upper = 0.9;
    double fit_lower = 0.05;
    std::size_t min_fit_samples = 20;
};

/// Linear interpolation of the series at time t (clamped at the ends).
inline double value_at(TimeSeries const& s, double t)
{
    if (s.empty()) { throw DimensionError("value_at: empty series"); }
    if (t <= s.times.front()) { return s.values.front(); }
    if (t >= s.times.back()) { return s.values.back(); }
    auto const it = std::upper_bound(s.times.begin(), s.times.end(), t);
    auto const k = static_cast<std::size_t>(it - s.times.begin());
    double const u = (t - s.times[k - 1]) / (s.times[k] - s.times[k - 1]);
    return s.values[k - 1] + u * (s.values[k] - s.values[k - 1]);
}

/// Mean over the last `tail_fraction` of the time window.
inline double long_time_average(TimeSeries const& s, double tail_fraction = 0.5,
                                std::size_t min_samples = 100)
{
    if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
        throw ConfigError("long_time_average: tail_fraction must lie in (0, 1]");
    }
    if (s.empty()) { throw ConfigError("long_time_average: empty series"); }
    double const t0 = s.times.back() - tail_fraction * (s.times.back() - s.times.front());
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (s.times[k] >= t0) {
            sum += s.values[k];
            ++count;
        }
    }
    if (count < min_samples) {
        std::ostringstream msg;
        msg << "long_time_average: tail holds " << count << " samples, need " << min_samples
            << " (series length >= " << static_cast<std::size_t>(std::ceil(min_samples / tail_fraction))
            << ")";
        throw ConfigError(msg.str());
    }
    return sum / static_cast<double>(count);
}

struct RelaxationTime {
    double tau = 0.0;
    bool censored = false; ///< 1/e level never reached; tau is then the final time
};

/// First time the deviation from `eq_value` drops to 1/e of its initial value.
inline RelaxationTime relaxation_time(TimeSeries const& s, double eq_value)
{
    if (s.size() < 2) { throw ConfigError("relaxation_time: need at least two samples"); }
    double const v0 = s.values.front();
    if (std::abs(v0 - eq_value) <= 1e-12 * std::max(1.0, std::abs(v0))) { return {s.times.back(), true}; }
    double const level = eq_value + (v0 - eq_value) / std::numbers::e;
    bool const falling = v0 > eq_value;
    for (std::size_t k = 1; k < s.size(); ++k) {
        double const v = s.values[k];
        if (falling ? v <= level : v >= level) {
            double const a = s.values[k - 1];
            double const u = (a == v) ? 1.0 : (a - level) / (a - v);
            return {s.times[k - 1] + u * (s.times[k] - s.times[k - 1]), false};
        }
    }
    return {s.times.back(), true};
}

struct DecayFit {
    double tau_rel = 0.0;
    double eq_value = 0.0;
    double amplitude = 0.0;
    double residual = 0.0; ///< rms in units of the series over the fit window
    std::size_t first = 0, last = 0; ///< fit window [first, last)
    bool shrunk = false;
};

/// Log-linear least squares on the part of the decay whose relative deviation
/// lies in [fit_lower, fit_upper].
inline DecayFit fit_exponential(TimeSeries const& s, double eq_value, AnalysisOptions const& opts = {})
{
    if (s.size() < 2) { throw ConfigError("fit_exponential: need at least two samples"); }
    double const d0 = s.values.front() - eq_value;
    if (std::abs(d0) <= 1e-12 * std::max(1.0, std::abs(eq_value))) {
        throw NumericError("fit_exponential: no initial deviation");
    }
    auto rel = [&](std::size_t k) { return (s.values[k] - eq_value) / d0; };

    std::size_t first = 0;
    while (first < s.size() && rel(first) > opts.fit_upper) { ++first; }
    std::size_t last = first;
    bool shrunk = false;
    while (last < s.size() && rel(last) >= opts.fit_lower) { ++last; }
    for (std::size_t k = first; k < last; ++k) {
        if (!(rel(k) > 0.0)) {
            last = k;
            shrunk = true;
            break;
        }
    }
    if (last - first < opts.min_fit_samples) {
        std::ostringstream msg;
        msg << "fit_exponential: " << (last - first) << " samples in the fit window, need "
            << opts.min_fit_samples;
        throw NumericError(msg.str());
    }
    double st = 0, sy = 0, stt = 0, sty = 0;
    auto const n = static_cast<double>(last - first);
    for (std::size_t k = first; k < last; ++k) {
        double const t = s.times[k];
        double const y = std::log(std::abs(s.values[k] - eq_value));
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    double const slope = (n * sty - st * sy) / (n * stt - st * st);
    double const intercept = (sy - slope * st) / n;
    if (!(slope < 0.0)) { throw NumericError("fit_exponential: fitted deviation does not decay"); }
    DecayFit f;
    f.tau_rel = -1.0 / slope;
    f.eq_value = eq_value;
    f.amplitude = std::copysign(std::exp(intercept), d0);
    f.first = first;
    f.last = last;
    f.shrunk = shrunk;
    double ss = 0.0;
    for (std::size_t k = first; k < last; ++k) {
        double const model = eq_value + f.amplitude * std::exp(-s.times[k] / f.tau_rel);
        ss += (model - s.values[k]) * (model - s.values[k]);
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

enum class Regime { nonMarkovian, Markovian, superweak };

inline std::string to_string(Regime r)
{
    switch (r) {
    case Regime::nonMarkovian: return "nonMarkovian";
    case Regime::Markovian: return "Markovian";
    case Regime::superweak: return "superweak";
    }
    return "unknown";
}

struct RegimeLabel {
    Regime regime = Regime::superweak;
    double longtime_avg = 0.0;
    double tau_rel = 0.0;
    bool censored = false;
    std::optional<double> fit_residual; ///< absent when the fit was impossible
    double tau_lambda2 = 0.0;
};

/// superweak if the long-time average stays above the threshold, otherwise
/// nonMarkovian above lambda_non_markovian and Markovian below.
inline RegimeLabel classify_regime(TimeSeries const& s, double lambda, AnalysisOptions const& opts = {})
{
    RegimeLabel out;
    out.longtime_avg = long_time_average(s, opts.tail_fraction, opts.min_tail_samples);
    auto const rt = relaxation_time(s, out.longtime_avg);
    out.tau_rel = rt.tau;
    out.censored = rt.censored;
    out.tau_lambda2 = rt.tau * lambda * lambda;
    try {
        out.fit_residual = fit_exponential(s, out.longtime_avg, opts).residual;
    }
    catch (NumericError const&) {
    }
    if (out.longtime_avg > opts.threshold) { out.regime = Regime::superweak; }
    else if (lambda > opts.lambda_non_markovian) { out.regime = Regime::nonMarkovian; }
    else { out.regime = Regime::Markovian; }
    return out;
}

struct LambdaCrit {
    double value = std::numeric_limits<double>::quiet_NaN();
    bool found = false;
    /// Without a straddle: the grid point whose average lies closest to the threshold.
    double nearest_lambda = 0.0;
    double nearest_avg = 0.0;
};

/// Threshold crossing of the long-time average, linear in log lambda. With
/// several crossings the one at the largest lambda wins.
inline LambdaCrit find_lambda_crit(std::vector<std::pair<double, double>> curve, double threshold = -0.04)
{
    if (curve.empty()) { throw ConfigError("find_lambda_crit: empty curve"); }
    for (auto const& [l, v] : curve) {
        if (!(l > 0.0)) { throw ConfigError("find_lambda_crit: lambda must be > 0"); }
    }
    std::sort(curve.begin(), curve.end());
    LambdaCrit out;
    double best = std::numeric_limits<double>::infinity();
    for (auto const& [l, v] : curve) {
        if (std::abs(v - threshold) < best) {
            best = std::abs(v - threshold);
            out.nearest_lambda = l;
            out.nearest_avg = v;
        }
    }
    for (std::size_t k = curve.size(); k-- > 1;) {
        auto const [l0, v0] = curve[k - 1];
        auto const [l1, v1] = curve[k];
        if (v0 > threshold && v1 <= threshold) {
            double const u = (v0 - threshold) / (v0 - v1);
            out.value = std::exp(std::log(l0) + u * (std::log(l1) - std::log(l0)));
            out.found = true;
            break;
        }
    }
    return out;
}

struct FgrFit {
    double r = 0.0;
    std::vector<double> ratios; ///< tau_rel * lambda^2 per point, input order
    double spread = 0.0;        ///< max/min of ratios
    bool warning = false;       ///< spread above 1.5
};

/// Least squares r in tau_rel = r / lambda^2.
inline FgrFit fit_fgr_constant(std::vector<std::pair<double, double>> const& points)
{
    if (points.size() < 3) { throw ConfigError("fit_fgr_constant: need at least 3 points"); }
    double num = 0.0, den = 0.0;
    FgrFit f;
    for (auto const& [l, tau] : points) {
        if (!(l > 0.0) || !(tau > 0.0)) { throw ConfigError("fit_fgr_constant: lambda and tau must be > 0"); }
        double const x = 1.0 / (l * l);
        num += tau * x;
        den += x * x;
        f.ratios.push_back(tau * l * l);
    }
    f.r = num / den;
    auto const [lo, hi] = std::minmax_element(f.ratios.begin(), f.ratios.end());
    f.spread = *hi / *lo;
    f.warning = f.spread > 1.5;
    return f;
}

/// Largest rms distance between any rescaled series (t -> lambda^2 t) and
/// their mean, on `samples` points of the common rescaled window.
inline double collapse_rms(std::vector<TimeSeries> const& series, std::size_t samples = 200)
{
    if (series.size() < 2) { throw ConfigError("collapse_rms: need at least two series"); }
    double t_end = std::numeric_limits<double>::infinity();
    for (auto const& s : series) {
        double const l2 = s.meta.lambda * s.meta.lambda;
        if (!(l2 > 0.0) || s.empty()) { throw ConfigError("collapse_rms: series need lambda > 0"); }
        t_end = std::min(t_end, l2 * s.times.back());
    }
    std::vector<std::vector<double>> grid(series.size(), std::vector<double>(samples));
    std::vector<double> mean(samples, 0.0);
    for (std::size_t i = 0; i < series.size(); ++i) {
        double const l2 = series[i].meta.lambda * series[i].meta.lambda;
        for (std::size_t k = 0; k < samples; ++k) {
            double const x = t_end * static_cast<double>(k) / static_cast<double>(samples - 1);
            grid[i][k] = value_at(series[i], x / l2);
            mean[k] += grid[i][k] / static_cast<double>(series.size());
        }
    }
    double worst = 0.0;
    for (auto const& g : grid) {
        double ss = 0.0;
        for (std::size_t k = 0; k < samples; ++k) { ss += (g[k] - mean[k]) * (g[k] - mean[k]); }
        worst = std::max(worst, std::sqrt(ss / static_cast<double>(samples)));
    }
    return worst;
}

} // namespace spinbath
