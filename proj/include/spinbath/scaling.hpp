#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include "dense.hpp"
#include "error.hpp"

namespace spinbath {

/// Omega(N, E) ~ (2^N / sqrt(N)) exp(-E^2 / (alpha N)) evaluated at inverse temperature beta.
struct DosModel {
    double alpha = 1.0;
    double beta = 0.4;

    /// log 2 - alpha beta^2 / 4; the density grows with N only when positive.
    double growth() const { return std::numbers::ln2 - 0.25 * alpha * beta * beta; }
    bool grows() const { return growth() > 0.0; }

    void validate() const
    {
        if (!(alpha > 0.0)) { throw ConfigError("DosModel: alpha must be > 0"); }
    }
};

/// Omega(N, beta) = N^{-1/2} exp(growth N), up to an N-independent constant.
inline double dos_at_beta(DosModel const& m, int N)
{
    m.validate();
    return std::exp(m.growth() * N) / std::sqrt(static_cast<double>(N));
}

/// b = growth / 2.
inline double scaling_exponent(DosModel const& m) { return 0.5 * m.growth(); }

/// alpha that yields the exponent b at inverse temperature beta.
inline double alpha_from_exponent(double b, double beta)
{
    return 4.0 * (std::numbers::ln2 - 2.0 * b) / (beta * beta);
}

/// lambda_crit = C2 N^{1/4} exp(-b N).
inline double predict_lambda_crit(double C2, double b, int N)
{
    return C2 * std::pow(static_cast<double>(N), 0.25) * std::exp(-b * N);
}

/// C2 / sqrt(Omega(N, beta)).
inline double predict_lambda_crit(DosModel const& m, int N, double C2)
{
    return C2 / std::sqrt(dos_at_beta(m, N));
}

/// lambda^2 C1 Omega pi^2 / 3; below one the coupling is superweak.
inline double perturbative_criterion(double lambda, DosModel const& m, int N, double C1)
{
    if (!(C1 > 0.0)) { throw ConfigError("perturbative_criterion: C1 must be > 0"); }
    return lambda * lambda * C1 * dos_at_beta(m, N) * std::numbers::pi * std::numbers::pi / 3.0;
}

/// C2 for which the criterion equals one exactly at the predicted lambda_crit.
inline double matched_C2(double C1) { return std::sqrt(3.0 / (C1 * std::numbers::pi * std::numbers::pi)); }

struct ScalingFit {
    double C2 = 0.0;
    double b = 0.0;
    double residual = 0.0; ///< rms in log lambda_crit
};

/// Least squares of log lambda_crit - (log N)/4 = log C2 - b N.
inline ScalingFit fit_scaling(std::vector<std::pair<int, double>> const& points)
{
    if (points.size() < 3) { throw ConfigError("fit_scaling: need at least 3 points"); }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    auto const n = static_cast<double>(points.size());
    for (auto const& [N, lc] : points) {
        if (!(lc > 0.0) || N < 1) { throw ConfigError("fit_scaling: need N >= 1 and lambda_crit > 0"); }
        double const x = N;
        double const y = std::log(lc) - 0.25 * std::log(x);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double const den = n * sxx - sx * sx;
    if (den == 0.0) { throw ConfigError("fit_scaling: need at least two distinct N"); }
    double const slope = (n * sxy - sx * sy) / den;
    double const intercept = (sy - slope * sx) / n;
    ScalingFit f{std::exp(intercept), -slope, 0.0};
    double ss = 0.0;
    for (auto const& [N, lc] : points) {
        double const r = std::log(lc) - std::log(predict_lambda_crit(f.C2, f.b, N));
        ss += r * r;
    }
    f.residual = std::sqrt(ss / n);
    return f;
}

struct GaussianDosFit {
    double mean = 0.0;
    double variance = 0.0;
    double alpha_moment = 0.0; ///< 2 variance / N
    double alpha_fit = 0.0;    ///< from a parabola fitted to the log level density
};

/// Gaussian description of a spectrum of `num_spins` spins.
inline GaussianDosFit fit_gaussian_dos(std::vector<double> const& eigenvalues, int num_spins, int bins = 40)
{
    if (eigenvalues.size() < 10) { throw ConfigError("fit_gaussian_dos: spectrum too small"); }
    GaussianDosFit f;
    for (double e : eigenvalues) { f.mean += e; }
    f.mean /= static_cast<double>(eigenvalues.size());
    for (double e : eigenvalues) { f.variance += (e - f.mean) * (e - f.mean); }
    f.variance /= static_cast<double>(eigenvalues.size());
    f.alpha_moment = 2.0 * f.variance / num_spins;

    // Parabola through log counts within two standard deviations of the mean.
    double const s = std::sqrt(f.variance);
    double const lo = f.mean - 2.0 * s, hi = f.mean + 2.0 * s;
    double const w = (hi - lo) / bins;
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (double e : eigenvalues) {
        if (e < lo || e >= hi) { continue; }
        counts[static_cast<std::size_t>((e - lo) / w)] += 1.0;
    }
    Eigen::MatrixXd X(bins, 3);
    Eigen::VectorXd y(bins);
    Eigen::Index rows = 0;
    for (int i = 0; i < bins; ++i) {
        if (counts[static_cast<std::size_t>(i)] <= 0.0) { continue; }
        double const x = lo + (i + 0.5) * w - f.mean;
        X.row(rows) << 1.0, x, x * x;
        y[rows] = std::log(counts[static_cast<std::size_t>(i)]);
        ++rows;
    }
    if (rows < 3) { throw NumericError("fit_gaussian_dos: too few populated bins"); }
    Eigen::VectorXd const c = X.topRows(rows).colPivHouseholderQr().solve(y.head(rows));
    f.alpha_fit = c[2] < 0.0 ? -1.0 / (c[2] * num_spins) : std::numeric_limits<double>::infinity();
    return f;
}

struct EthConstant {
    double C1 = 0.0;           ///< pair-weighted mean of |<m|H_int|n>|^2 Omega
    double spread = 0.0;       ///< max/min of C1 over energy sub-bins
    std::size_t states = 0;    ///< eigenstates of H0 inside the window
    std::size_t pairs = 0;
    std::vector<double> bin_C1;
};

/// ETH scale from eigenstates of H0 within +-half_width of target: in each
/// sector, |<m|H_int|n>|^2 (m != n) times the sector density of states in the
/// window. `sub_bins` slices the window by pair energy to probe constancy.
inline EthConstant measure_eth_constant(SectorModel const& m, double target, double half_width = 0.5,
                                        int sub_bins = 4, int workers = 1)
{
    if (!(half_width > 0.0) || sub_bins < 1) { throw ConfigError("measure_eth_constant: bad window"); }
    std::vector<double> bin_sum(static_cast<std::size_t>(sub_bins), 0.0);
    std::vector<double> bin_count(static_cast<std::size_t>(sub_bins), 0.0);
    std::vector<std::size_t> states(m.sectors.size(), 0);
    std::vector<std::vector<double>> part_sum(m.sectors.size(), std::vector<double>(bin_sum.size(), 0.0));
    std::vector<std::vector<double>> part_count(m.sectors.size(), std::vector<double>(bin_sum.size(), 0.0));
    parallel_for(m.sectors.size(), workers, [&](std::size_t s) {
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(to_dense(m.h0[s]));
        auto const& e = es.eigenvalues();
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < e.size(); ++j) {
            if (std::abs(e[j] - target) <= half_width) { idx.push_back(j); }
        }
        states[s] = idx.size();
        if (idx.size() < 2) { return; }
        DenseMatrix const v = es.eigenvectors()(Eigen::all, idx);
        DenseMatrix const hv = v.transpose() * sparse_times_dense(m.h_int[s], v);
        double const omega = static_cast<double>(idx.size()) / (2.0 * half_width);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t j = 0; j < idx.size(); ++j) {
                if (i == j) { continue; }
                double const x = hv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                double const em = 0.5 * (e[idx[i]] + e[idx[j]]);
                auto const bin = std::min<std::size_t>(
                    bin_sum.size() - 1,
                    static_cast<std::size_t>((em - target + half_width) / (2.0 * half_width) * sub_bins));
                part_sum[s][bin] += x * x * omega;
                part_count[s][bin] += 1.0;
            }
        }
    });
    EthConstant out;
    double sum = 0.0, count = 0.0;
    for (std::size_t s = 0; s < m.sectors.size(); ++s) {
        out.states += states[s];
        for (std::size_t b = 0; b < bin_sum.size(); ++b) {
            bin_sum[b] += part_sum[s][b];
            bin_count[b] += part_count[s][b];
        }
    }
    for (std::size_t b = 0; b < bin_sum.size(); ++b) {
        sum += bin_sum[b];
        count += bin_count[b];
        if (bin_count[b] > 0.0) { out.bin_C1.push_back(bin_sum[b] / bin_count[b]); }
    }
    if (!(count > 0.0)) { throw EmptyWindowError("measure_eth_constant: no pairs in the window"); }
    out.pairs = static_cast<std::size_t>(count);
    out.C1 = sum / count;
    auto const [lo, hi] = std::minmax_element(out.bin_C1.begin(), out.bin_C1.end());
    out.spread = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
    return out;
}

} // namespace spinbath
