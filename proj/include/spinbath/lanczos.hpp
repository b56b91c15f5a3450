#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "random.hpp"
#include "sparse_operator.hpp"

namespace spinbath {

/// Closed interval [lower, upper] enclosing a spectrum.
struct SpectralBounds {
    double lower = 0.0;
    double upper = 0.0;

    double half_span() const noexcept { return 0.5 * (upper - lower); }
    double center() const noexcept { return 0.5 * (upper + lower); }
    bool contains(SpectralBounds const& other) const noexcept
    {
        return lower <= other.lower && other.upper <= upper;
    }
    /// Widens both ends by `margin` times the half-span.
    SpectralBounds widened(double margin) const noexcept
    {
        double const pad = margin * half_span();
        return {lower - pad, upper + pad};
    }
};

struct LanczosOptions {
    double tol = 1e-10;      ///< residual tolerance relative to the span
    int max_iter = 600;
    std::uint64_t seed = 0;
};

namespace detail {

template <class Scalar>
double real_part(Scalar const& x)
{
    return std::real(x);
}

} // namespace detail

/// Extremal eigenvalues of a Hermitian operator by Lanczos, returned as an
/// enclosing interval widened by `margin` (relative to the half-span).
///
/// The raw interval is [theta_min - r_min, theta_max + r_max], with theta the
/// extremal Ritz values and r their residual norms. Small spaces (dim <=
/// max_iter) are handled with full reorthogonalisation, which makes the
/// Krylov space exhaust the operator exactly.
template <class Scalar>
SpectralBounds estimate_spectral_bounds(SparseOperator<Scalar> const& op, double margin = 0.02,
                                        LanczosOptions const& opts = {})
{
    if (!op.hermitian()) { throw Error("estimate_spectral_bounds: operator is not hermitian"); }
    std::size_t const n = op.dim();
    if (n == 0) { throw DimensionError("estimate_spectral_bounds: empty operator"); }
    constexpr double min_half_span = 1e-8;

    auto finish = [&](double lo, double hi) {
        SpectralBounds b{lo, hi};
        if (b.half_span() < min_half_span) {
            b = {b.center() - min_half_span, b.center() + min_half_span};
        }
        return b.widened(margin);
    };

    if (n == 1) {
        double const v = detail::real_part(op.at(0, 0));
        return finish(v, v);
    }

    bool const full_reorth = n <= static_cast<std::size_t>(opts.max_iter);
    int const max_iter = full_reorth ? static_cast<int>(n) : opts.max_iter;

    auto gen = make_stream(opts.seed, stream_tag::lanczos);
    std::normal_distribution<double> gauss;
    std::vector<Scalar> v(n), w(n), v_prev(n, Scalar{});
    for (auto& x : v) {
        if constexpr (detail::is_complex<Scalar>::value) { x = Scalar(gauss(gen), gauss(gen)); }
        else { x = gauss(gen); }
    }
    auto vnorm = [](std::vector<Scalar> const& x) {
        double s = 0.0;
        for (auto const& a : x) { s += std::norm(a); }
        return std::sqrt(s);
    };
    double const n0 = vnorm(v);
    for (auto& x : v) { x /= n0; }

    std::vector<std::vector<Scalar>> basis;
    if (full_reorth) { basis.push_back(v); }
    std::vector<double> alpha, beta;
    double beta_prev = 0.0;

    double lo = 0.0, hi = 0.0, res_lo = 0.0, res_hi = 0.0;
    for (int k = 0; k < max_iter; ++k) {
        op.apply(std::span<Scalar const>(v), std::span<Scalar>(w));
        complex a{};
        for (std::size_t i = 0; i < n; ++i) { a += complex(detail::conj(v[i])) * complex(w[i]); }
        alpha.push_back(a.real());
        for (std::size_t i = 0; i < n; ++i) { w[i] -= a.real() * v[i] + beta_prev * v_prev[i]; }
        if (full_reorth) {
            for (int pass = 0; pass < 2; ++pass) {
                for (auto const& q : basis) {
                    complex ov{};
                    for (std::size_t i = 0; i < n; ++i) { ov += complex(detail::conj(q[i])) * complex(w[i]); }
                    for (std::size_t i = 0; i < n; ++i) {
                        if constexpr (detail::is_complex<Scalar>::value) { w[i] -= ov * q[i]; }
                        else { w[i] -= ov.real() * q[i]; }
                    }
                }
            }
        }
        double const b = vnorm(w);

        int const m = static_cast<int>(alpha.size());
        bool const last = k + 1 == max_iter;
        double const scale = std::max({std::abs(lo), std::abs(hi), 1.0});
        bool const breakdown = b < 1e-13 * scale;
        if (m % 10 == 0 || last || breakdown || m < 10) {
            Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
            Eigen::VectorXd e(std::max(m - 1, 0));
            for (int i = 0; i + 1 < m; ++i) { e[i] = beta[static_cast<std::size_t>(i)]; }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
            tri.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
            lo = tri.eigenvalues()[0];
            hi = tri.eigenvalues()[m - 1];
            res_lo = breakdown ? 0.0 : std::abs(b * tri.eigenvectors()(m - 1, 0));
            res_hi = breakdown ? 0.0 : std::abs(b * tri.eigenvectors()(m - 1, m - 1));
            double const span = std::max(hi - lo, 1e-300);
            if (breakdown || (m >= 10 && res_lo < opts.tol * span && res_hi < opts.tol * span)) {
                return finish(lo - res_lo, hi + res_hi);
            }
            if (full_reorth && last) { return finish(lo - res_lo, hi + res_hi); }
        }
        beta.push_back(b);
        beta_prev = b;
        std::swap(v_prev, v);
        for (std::size_t i = 0; i < n; ++i) { v[i] = w[i] / b; }
        if (full_reorth) { basis.push_back(v); }
    }
    std::ostringstream msg;
    msg << "Lanczos bounds did not converge after " << max_iter << " iterations (residuals "
        << res_lo << ", " << res_hi << ")";
    throw NumericError(msg.str());
}

} // namespace spinbath
