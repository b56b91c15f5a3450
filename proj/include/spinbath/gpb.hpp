#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "analysis.hpp"
#include "dense.hpp"
#include "error.hpp"
#include "time_series.hpp"

namespace spinbath {

/// Normalised weights p_jk at gaps G = E_j - E_k (both orders of every pair).
struct GapDistribution {
    std::vector<double> gaps;
    std::vector<double> weights;
    double raw_total = 0.0;     ///< sum |rho_jk A_kj| over the support, before normalisation
    double excluded_mass = 0.0; ///< same sum over |G| <= degeneracy tolerance

    bool empty() const noexcept { return gaps.empty(); }
    std::size_t size() const noexcept { return gaps.size(); }

    double mean() const
    {
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i) { m += weights[i] * gaps[i]; }
        return m;
    }

    /// Standard deviation of the point masses.
    double sigma() const
    {
        double const m = mean();
        double v = 0.0;
        for (std::size_t i = 0; i < size(); ++i) { v += weights[i] * (gaps[i] - m) * (gaps[i] - m); }
        return std::sqrt(v);
    }
};

/// Builds a distribution from arbitrary non-negative masses (normalised here).
inline GapDistribution make_distribution(std::vector<double> gaps, std::vector<double> masses)
{
    if (gaps.size() != masses.size()) { throw DimensionError("make_distribution: size mismatch"); }
    GapDistribution d;
    for (double m : masses) {
        if (m < 0.0) { throw ConfigError("make_distribution: negative mass"); }
        d.raw_total += m;
    }
    if (!(d.raw_total > 0.0)) { throw ConfigError("make_distribution: zero total mass"); }
    for (auto& m : masses) { m /= d.raw_total; }
    d.gaps = std::move(gaps);
    d.weights = std::move(masses);
    return d;
}

/// p_jk = |rho_jk A_kj| with rho and A already in the eigenbasis of H.
inline GapDistribution build_gap_distribution(DenseBlocks const& rho_eig, DenseBlocks const& a_eig,
                                              SpectralData const& spec)
{
    if (rho_eig.size() != spec.blocks.size() || a_eig.size() != spec.blocks.size()) {
        throw DimensionError("build_gap_distribution: block count mismatch");
    }
    GapDistribution d;
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        auto const& e = spec.blocks[b].energies;
        auto const& r = rho_eig[b];
        auto const& a = a_eig[b];
        if (e.size() == 0) { continue; }
        // Round-off level products (e.g. A commuting with H) carry no mass.
        double const floor = 1e-13 * r.cwiseAbs().maxCoeff() * a.cwiseAbs().maxCoeff();
        for (Eigen::Index j = 0; j < e.size(); ++j) {
            for (Eigen::Index k = 0; k < e.size(); ++k) {
                double const m = std::abs(r(j, k) * a(k, j));
                if (m <= floor) { continue; }
                double const g = e[j] - e[k];
                if (std::abs(g) <= spec.degeneracy_tol) { d.excluded_mass += m; }
                else {
                    d.gaps.push_back(g);
                    d.weights.push_back(m);
                    d.raw_total += m;
                }
            }
        }
    }
    if (d.raw_total > 0.0) {
        for (auto& w : d.weights) { w /= d.raw_total; }
    }
    return d;
}

inline GapDistribution build_gap_distribution(DenseBlocks const& rho, SparseBlocks const& a,
                                              SpectralData const& spec)
{
    return build_gap_distribution(to_eigenbasis(rho, spec), to_eigenbasis(a, spec), spec);
}

/// Density histogram with bins centred at k * epsilon.
struct GapHistogram {
    double epsilon = 0.0;
    long k_min = 0;
    std::vector<double> density;
    double sigma_G = 0.0;
    double w_max = 0.0;
    bool sparse = false; ///< epsilon below the smallest spacing between distinct gaps

    double center(std::size_t i) const { return (k_min + static_cast<long>(i)) * epsilon; }

    double integral() const
    {
        double s = 0.0;
        for (double w : density) { s += w * epsilon; }
        return s;
    }

    double density_at(double g) const
    {
        long const k = std::lround(g / epsilon) - k_min;
        if (k < 0 || k >= static_cast<long>(density.size())) { return 0.0; }
        return density[static_cast<std::size_t>(k)];
    }
};

inline GapHistogram histogram(GapDistribution const& dist, double epsilon)
{
    if (!(epsilon > 0.0)) { throw ConfigError("histogram: epsilon must be > 0"); }
    if (dist.empty()) { throw NumericError("histogram: empty gap distribution"); }
    GapHistogram h;
    h.epsilon = epsilon;
    long lo = std::numeric_limits<long>::max(), hi = std::numeric_limits<long>::min();
    for (double g : dist.gaps) {
        long const k = std::lround(g / epsilon);
        lo = std::min(lo, k);
        hi = std::max(hi, k);
    }
    h.k_min = lo;
    h.density.assign(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (std::size_t i = 0; i < dist.size(); ++i) {
        h.density[static_cast<std::size_t>(std::lround(dist.gaps[i] / epsilon) - lo)] +=
            dist.weights[i] / epsilon;
    }
    h.w_max = *std::max_element(h.density.begin(), h.density.end());
    h.sigma_G = dist.sigma();
    auto sorted = dist.gaps;
    std::sort(sorted.begin(), sorted.end());
    double spacing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        double const d = sorted[i] - sorted[i - 1];
        if (d > 0.0) { spacing = std::min(spacing, d); }
    }
    h.sparse = epsilon < spacing;
    return h;
}

/// Integral of |w1 - w2| over G for two piecewise-constant densities.
inline double histogram_l1(GapHistogram const& h1, GapHistogram const& h2)
{
    std::vector<double> edges;
    for (auto const* h : {&h1, &h2}) {
        for (std::size_t i = 0; i <= h->density.size(); ++i) {
            edges.push_back((static_cast<double>(h->k_min + static_cast<long>(i)) - 0.5) * h->epsilon);
        }
    }
    std::sort(edges.begin(), edges.end());
    double l1 = 0.0;
    for (std::size_t i = 1; i < edges.size(); ++i) {
        double const w = edges[i] - edges[i - 1];
        if (w <= 0.0) { continue; }
        double const mid = 0.5 * (edges[i] + edges[i - 1]);
        l1 += w * std::abs(h1.density_at(mid) - h2.density_at(mid));
    }
    return l1;
}

inline double compute_a(GapHistogram const& h)
{
    if (h.density.empty()) { throw NumericError("compute_a: empty histogram"); }
    return h.w_max * h.sigma_G;
}

struct EpsilonScan {
    std::vector<double> epsilon;
    std::vector<double> a;
    std::vector<double> distance; ///< L1 between consecutive histograms
    bool plateau = false;
    std::size_t plateau_first = 0, plateau_last = 0; ///< epsilon indices, inclusive
    double chosen_epsilon = std::numeric_limits<double>::quiet_NaN();
};

/// Histograms over a geometric epsilon grid. A plateau is the longest run of
/// at least two consecutive distances below `tol`.
inline EpsilonScan epsilon_independence_scan(GapDistribution const& dist,
                                             std::vector<double> const& eps_grid, double tol = 0.05)
{
    if (eps_grid.size() < 5) { throw ConfigError("epsilon scan: need at least 5 epsilon values"); }
    double const ratio = eps_grid[1] / eps_grid[0];
    for (std::size_t i = 1; i < eps_grid.size(); ++i) {
        double const r = eps_grid[i] / eps_grid[i - 1];
        if (!(eps_grid[i - 1] > 0.0) || !(r > 1.0) || std::abs(r - ratio) > 1e-6 * ratio) {
            throw ConfigError("epsilon scan: grid must be ascending and geometric");
        }
    }
    EpsilonScan s;
    s.epsilon = eps_grid;
    std::vector<GapHistogram> hs;
    for (double e : eps_grid) {
        hs.push_back(histogram(dist, e));
        s.a.push_back(compute_a(hs.back()));
    }
    for (std::size_t i = 1; i < hs.size(); ++i) { s.distance.push_back(histogram_l1(hs[i - 1], hs[i])); }
    std::size_t best = 0, best_start = 0, run = 0;
    for (std::size_t i = 0; i < s.distance.size(); ++i) {
        run = s.distance[i] < tol ? run + 1 : 0;
        if (run > best) {
            best = run;
            best_start = i + 1 - run;
        }
    }
    if (best >= 2) {
        s.plateau = true;
        s.plateau_first = best_start;
        s.plateau_last = best_start + best;
        s.chosen_epsilon = eps_grid[(s.plateau_first + s.plateau_last) / 2];
    }
    return s;
}

/// Sum |rho_jk A_kj| off the degenerate pairs, divided by ||A||.
inline double compute_Q(GapDistribution const& dist, double a_norm)
{
    if (!(a_norm > 0.0)) { throw NumericError("compute_Q: ||A|| must be > 0"); }
    return dist.raw_total / a_norm;
}

inline double compute_Q(DenseBlocks const& rho, SparseBlocks const& a, SpectralData const& spec)
{
    return compute_Q(build_gap_distribution(rho, a, spec), operator_norm(a));
}

/// Tr(X Z) for sparse X and dense Z, touching only the needed entries.
inline double trace_product(RealOperator const& x, DenseMatrix const& z)
{
    auto const off = x.offsets();
    auto const col = x.columns();
    auto const val = x.values();
    double t = 0.0;
    for (std::size_t r = 0; r < x.dim(); ++r) {
        for (std::size_t k = off[r]; k < off[r + 1]; ++k) {
            t += val[k] * z(static_cast<Eigen::Index>(col[k]), static_cast<Eigen::Index>(r));
        }
    }
    return t;
}

/// Tr(rho [X, [Y, A]]), summed over blocks, by sparse-dense products.
inline double nested_commutator_trace(DenseBlocks const& rho, SparseBlocks const& x,
                                      SparseBlocks const& y, SparseBlocks const& a)
{
    if (rho.size() != x.size() || x.size() != y.size() || y.size() != a.size()) {
        throw DimensionError("nested_commutator_trace: block count mismatch");
    }
    double t = 0.0;
    for (std::size_t b = 0; b < rho.size(); ++b) {
        auto const ar = sparse_times_dense(a[b], rho[b]);
        auto const yr = sparse_times_dense(y[b], rho[b]);
        auto const xr = sparse_times_dense(x[b], rho[b]);
        // [X,[Y,A]] rho = XYA rho - XAY rho - YAX rho + AYX rho
        t += trace_product(x[b], sparse_times_dense(y[b], ar));
        t -= trace_product(x[b], sparse_times_dense(a[b], yr));
        t -= trace_product(y[b], sparse_times_dense(a[b], xr));
        t += trace_product(a[b], sparse_times_dense(y[b], xr));
    }
    return t;
}

/// |Tr([[rho,H],H] A)|.
inline double initial_curvature(DenseBlocks const& rho, SparseBlocks const& h, SparseBlocks const& a)
{
    return std::abs(nested_commutator_trace(rho, h, h, a));
}

/// <psi|[X,[Y,A]]|psi> for Hermitian X, Y, A.
template <class Scalar>
double state_nested_commutator(SparseOperator<Scalar> const& x, SparseOperator<Scalar> const& y,
                               RealOperator const& a, StateVector const& psi)
{
    auto const xp = x.apply(psi);
    auto const yp = y.apply(psi);
    auto const ap = a.apply(psi);
    // <Xp|YAp> - <Xp|AYp> - <Yp|AXp> + <Ap|YXp>
    return (inner(xp, y.apply(ap)) - inner(xp, a.apply(yp)) - inner(yp, a.apply(xp)) + inner(ap, y.apply(xp)))
        .real();
}

/// <psi|[H,[H,A]]|psi> = 2 Re<H^2 psi|A psi> - 2 <H psi|A|H psi>, signed.
template <class Scalar>
double state_curvature(SparseOperator<Scalar> const& h, RealOperator const& a, StateVector const& psi)
{
    auto const hp = h.apply(psi);
    auto const hhp = h.apply(hp);
    auto const ap = a.apply(psi);
    return 2.0 * inner(hhp, ap).real() - 2.0 * expectation(a, hp).real();
}

struct CurvatureCoefficients {
    double c1 = 0.0; ///< Tr([H_int, A][rho, H0])
    double c2 = 0.0; ///< Tr([H_int, A][rho, H_int])

    double curvature(double lambda) const { return std::abs(c1 * lambda + c2 * lambda * lambda); }
};

inline CurvatureCoefficients curvature_coefficients(DenseBlocks const& rho, SparseBlocks const& h0,
                                                    SparseBlocks const& h_int, SparseBlocks const& a)
{
    return {nested_commutator_trace(rho, h0, h_int, a), nested_commutator_trace(rho, h_int, h_int, a)};
}

struct GpbTime {
    double numerator = 0.0;
    double T_eq = std::numeric_limits<double>::infinity();
    bool defined = false; ///< false when the curvature vanishes
};

/// T_eq = pi a ||A||^{1/2} Q^{5/2} / sqrt(curvature).
inline GpbTime gpb_time(double a, double Q, double a_norm, double curvature)
{
    GpbTime t;
    t.numerator = std::numbers::pi * a * std::sqrt(a_norm) * std::pow(Q, 2.5);
    if (curvature > 0.0) {
        t.T_eq = t.numerator / std::sqrt(curvature);
        t.defined = true;
    }
    return t;
}

struct LowerBound {
    double value = 0.0;
    bool censored = false; ///< tau_rel was itself only a lower bound
};

inline LowerBound numerator_lower_bound(double tau_rel, double curvature, bool censored = false)
{
    if (tau_rel < 0.0 || curvature < 0.0) { throw ConfigError("numerator_lower_bound: negative input"); }
    return {tau_rel * std::sqrt(curvature), censored};
}

struct GpbReport {
    bool partial = false; ///< above the ED cap: curvature and lower bound only
    double lambda = 0.0;
    double a = std::numeric_limits<double>::quiet_NaN();
    double Q = std::numeric_limits<double>::quiet_NaN();
    double A_norm = 0.5;
    double curvature = 0.0;
    double T_eq = std::numeric_limits<double>::infinity();
    bool T_eq_defined = false;
    double numerator = std::numeric_limits<double>::quiet_NaN();
    std::optional<LowerBound> lower_bound;
    double tau_rel = std::numeric_limits<double>::quiet_NaN();
    double c1 = 0.0;
    double c2 = 0.0;
    double sigma_G = 0.0;
    double w_max = 0.0;
    double epsilon = 0.0;
    bool epsilon_valid = false;
    double excluded_mass = 0.0;
    std::size_t support = 0;
    EpsilonScan scan;
    GapHistogram hist;
};

struct GpbOptions {
    /// Epsilon grid as multiples of sigma_G.
    std::vector<double> eps_relative = geometric_grid(0.02, 0.2, 6);
    double plateau_tol = 0.05;
};

/// Every quantity of the bound for one (rho, A, H = H0 + lambda H_int).
inline GpbReport gpb_report(DenseBlocks const& rho, SectorModel const& m, SpectralData const& spec,
                            GpbOptions const& opts = {})
{
    GpbReport r;
    r.lambda = m.lambda;
    r.A_norm = operator_norm(m.a);
    auto const rho_e = to_eigenbasis(rho, spec);
    auto const a_e = to_eigenbasis(m.a, spec);
    auto const dist = build_gap_distribution(rho_e, a_e, spec);
    r.excluded_mass = dist.excluded_mass;
    r.support = dist.size();
    r.Q = compute_Q(dist, r.A_norm);
    auto const cc = curvature_coefficients(rho, m.h0, m.h_int, m.a);
    r.c1 = cc.c1;
    r.c2 = cc.c2;
    r.curvature = initial_curvature(rho, m.h, m.a);
    if (dist.empty()) {
        r.a = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    double const sg = dist.sigma();
    std::vector<double> grid;
    for (double e : opts.eps_relative) { grid.push_back(e * sg); }
    r.scan = epsilon_independence_scan(dist, grid, opts.plateau_tol);
    r.epsilon_valid = r.scan.plateau;
    r.epsilon = r.scan.plateau ? r.scan.chosen_epsilon : grid[grid.size() / 2];
    r.hist = histogram(dist, r.epsilon);
    r.sigma_G = r.hist.sigma_G;
    r.w_max = r.hist.w_max;
    r.a = compute_a(r.hist);
    auto const t = gpb_time(r.a, r.Q, r.A_norm, r.curvature);
    r.numerator = t.numerator;
    r.T_eq = t.T_eq;
    r.T_eq_defined = t.defined;
    return r;
}

/// Sum_jk rho_jk A_kj cos((E_j - E_k) t) on the grid (eigenbasis inputs).
inline std::vector<double> exact_expectation_series(DenseBlocks const& rho_eig, DenseBlocks const& a_eig,
                                                    SpectralData const& spec,
                                                    std::vector<double> const& times)
{
    std::vector<double> out(times.size(), 0.0);
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        auto const& e = spec.blocks[b].energies;
        for (Eigen::Index j = 0; j < e.size(); ++j) {
            for (Eigen::Index k = 0; k < e.size(); ++k) {
                double const w = rho_eig[b](j, k) * a_eig[b](k, j);
                if (w == 0.0) { continue; }
                double const g = e[j] - e[k];
                for (std::size_t n = 0; n < times.size(); ++n) { out[n] += w * std::cos(g * times[n]); }
            }
        }
    }
    return out;
}

/// <psi(t)|A|psi(t)> from the eigendecomposition of one block.
inline std::vector<double> exact_state_series(SectorSpectrum const& block, RealOperator const& a,
                                              StateVector const& psi, std::vector<double> const& times)
{
    auto const d = block.energies.size();
    if (static_cast<Eigen::Index>(psi.size()) != d || a.dim() != psi.size()) {
        throw DimensionError("exact_state_series: dimension mismatch");
    }
    Eigen::Map<Eigen::VectorXcd const> p(psi.data(), d);
    Eigen::VectorXcd const c = block.vectors.transpose().cast<complex>() * p;
    Eigen::MatrixXcd const v = block.vectors.cast<complex>();
    std::vector<double> out;
    out.reserve(times.size());
    StateVector x(psi.size());
    for (double t : times) {
        Eigen::VectorXcd ph(d);
        for (Eigen::Index j = 0; j < d; ++j) { ph[j] = c[j] * std::exp(complex(0.0, -block.energies[j] * t)); }
        Eigen::Map<Eigen::VectorXcd>(x.data(), d) = v * ph;
        out.push_back(expectation(a, x).real());
    }
    return out;
}

/// Infinite-time average of <A> (degenerate pairs kept, eigenbasis inputs).
inline double diagonal_ensemble_value(DenseBlocks const& rho_eig, DenseBlocks const& a_eig,
                                      SpectralData const& spec)
{
    double v = 0.0;
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        auto const& e = spec.blocks[b].energies;
        for (Eigen::Index j = 0; j < e.size(); ++j) {
            for (Eigen::Index k = 0; k < e.size(); ++k) {
                if (std::abs(e[j] - e[k]) <= spec.degeneracy_tol) { v += rho_eig[b](j, k) * a_eig[b](k, j); }
            }
        }
    }
    return v;
}

/// Microcanonical <A>: in every block a Gaussian shell (variance delta) of
/// eigenstates of H around the block's initial energy Tr(rho H)/Tr(rho),
/// blocks weighted by Tr(rho).
inline double microcanonical_value(DenseBlocks const& rho, SectorModel const& m, SpectralData const& spec,
                                   double delta)
{
    auto const a_e = to_eigenbasis(m.a, spec);
    double value = 0.0, weight = 0.0;
    for (std::size_t b = 0; b < spec.blocks.size(); ++b) {
        double const tr = rho[b].trace();
        if (tr <= 0.0) { continue; }
        double const e0 = trace_product(m.h[b], rho[b]) / tr;
        auto const& e = spec.blocks[b].energies;
        double num = 0.0, den = 0.0;
        for (Eigen::Index j = 0; j < e.size(); ++j) {
            double const g = gaussian_window(e[j], e0, delta);
            num += g * a_e[b](j, j);
            den += g;
        }
        if (den > 0.0) {
            value += tr * num / den;
            weight += tr;
        }
    }
    if (!(weight > 0.0)) { throw EmptyWindowError("microcanonical_value: no populated block"); }
    return value / weight;
}

struct FourierCheck {
    double l1 = 0.0;
    double duration = 0.0;
    std::vector<double> transform_mass; ///< per histogram bin, normalised
    std::vector<double> histogram_mass; ///< per histogram bin
};

namespace detail {

inline double uniform_spacing(TimeSeries const& s)
{
    if (s.size() < 3 || s.times.front() != 0.0) {
        throw ConfigError("fourier: need a series on a uniform grid starting at 0");
    }
    double const dt = s.times[1] - s.times[0];
    for (std::size_t k = 1; k < s.size(); ++k) {
        if (std::abs(s.times[k] - s.times[k - 1] - dt) > 1e-9 * dt) {
            throw ConfigError("fourier: time grid is not uniform");
        }
    }
    return dt;
}

/// Trapezoid weight times the Hann window cos^2(pi t / 2T) times the samples.
inline std::vector<double> windowed(TimeSeries const& s, double baseline, double dt)
{
    double const T = s.times.back();
    std::vector<double> y(s.size());
    for (std::size_t n = 0; n < s.size(); ++n) {
        double const w = std::pow(std::cos(std::numbers::pi * s.times[n] / (2.0 * T)), 2);
        double const c = (n == 0 || n + 1 == s.size()) ? 0.5 : 1.0;
        y[n] = c * dt * w * (s.values[n] - baseline);
    }
    return y;
}

} // namespace detail

/// Spectral mass of the windowed, mean-subtracted, evenly extended series in
/// each bin of `hist`, compared with the histogram masses.
inline FourierCheck fourier_check(TimeSeries const& s, GapHistogram const& hist, double min_cycles = 20.0)
{
    double const dt = detail::uniform_spacing(s);
    double const T = s.times.back();
    double const need = min_cycles * std::numbers::pi / hist.epsilon;
    if (T < need) {
        std::ostringstream msg;
        msg << "fourier_check: series lasts " << T << ", the histogram resolution needs t_max >= " << need;
        throw ConfigError(msg.str());
    }
    double mean = 0.0;
    for (double v : s.values) { mean += v; }
    mean /= static_cast<double>(s.size());
    auto const y = detail::windowed(s, mean, dt);

    std::size_t const nb = hist.density.size();
    // F(omega) = (1/pi) sum_n y_n sin(omega t_n) / t_n, the t = 0 term being omega y_0 / pi.
    auto cumulative = [&](double omega) {
        double f = omega * y[0];
        for (std::size_t n = 1; n < y.size(); ++n) { f += y[n] * std::sin(omega * s.times[n]) / s.times[n]; }
        return f / std::numbers::pi;
    };
    std::vector<double> edge(nb + 1);
    for (std::size_t i = 0; i <= nb; ++i) {
        edge[i] = cumulative((static_cast<double>(hist.k_min + static_cast<long>(i)) - 0.5) * hist.epsilon);
    }
    FourierCheck out;
    out.duration = T;
    double total = 0.0;
    for (std::size_t i = 0; i < nb; ++i) {
        out.transform_mass.push_back(edge[i + 1] - edge[i]);
        total += out.transform_mass.back();
        out.histogram_mass.push_back(hist.density[i] * hist.epsilon);
    }
    if (!(total > 0.0)) { throw NumericError("fourier_check: transform has no mass in the histogram range"); }
    for (std::size_t i = 0; i < nb; ++i) {
        out.transform_mass[i] /= total;
        out.l1 += std::abs(out.transform_mass[i] - out.histogram_mass[i]);
    }
    return out;
}

/// Half width at half maximum of the windowed cosine transform of
/// (series - baseline); 1/tau for an exponential decay with long enough data.
inline double lorentzian_half_width(TimeSeries const& s, double baseline)
{
    double const dt = detail::uniform_spacing(s);
    double const T = s.times.back();
    auto const y = detail::windowed(s, baseline, dt);
    auto spectrum = [&](double omega) {
        double f = 0.0;
        for (std::size_t n = 0; n < y.size(); ++n) { f += y[n] * std::cos(omega * s.times[n]); }
        return f / std::numbers::pi;
    };
    double const peak = spectrum(0.0);
    if (!(peak > 0.0)) { throw NumericError("lorentzian_half_width: no spectral peak at zero"); }
    double const step = std::numbers::pi / (4.0 * T);
    double lo = 0.0, hi = step;
    while (spectrum(hi) > 0.5 * peak) {
        lo = hi;
        hi += step;
        if (hi > std::numbers::pi / dt) { throw NumericError("lorentzian_half_width: no half maximum below Nyquist"); }
    }
    for (int it = 0; it < 60; ++it) {
        double const mid = 0.5 * (lo + hi);
        (spectrum(mid) > 0.5 * peak ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace spinbath
