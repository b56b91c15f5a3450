#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>
#include <vector>

#include "error.hpp"
#include "lanczos.hpp"
#include "sparse_operator.hpp"
#include "time_series.hpp"

namespace spinbath {

/// Chebyshev expansion of exp(-i H dt) on the rescaled axis (H - center)/half_span.
///
/// exp(-i H dt) = phase * [c_0 + 2 sum_{n>=1} c_n T_n(H~)], c_n = (-i)^n J_n(a dt).
struct PropagatorPlan {
    SpectralBounds bounds;
    double half_span = 1.0;
    double center = 0.0;
    double dt = 0.0;
    int order = 0;
    std::vector<complex> coeffs;
    complex phase{1.0, 0.0};

    /// FNV-1a over the numbers that define the plan.
    std::uint64_t hash() const noexcept
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto eat = [&h](std::uint64_t v) {
            for (int i = 0; i < 8; ++i) {
                h ^= (v >> (8 * i)) & 0xffU;
                h *= 0x100000001b3ULL;
            }
        };
        eat(std::bit_cast<std::uint64_t>(half_span));
        eat(std::bit_cast<std::uint64_t>(center));
        eat(std::bit_cast<std::uint64_t>(dt));
        eat(static_cast<std::uint64_t>(order));
        return h;
    }
};

struct ChebyshevOptions {
    double tol = 1e-14;
    int guard = 5;
    int max_order = 4096;
    /// Target a * dt for a single propagation step.
    double step_phase = 10.0;
};

/// J_n(x) for integer n, any real x.
inline double bessel_j(int n, double x)
{
    double const v = std::cyl_bessel_j(static_cast<double>(n), std::abs(x));
    return (x < 0.0 && (n % 2 != 0)) ? -v : v;
}

/// Largest single step with a * dt equal to `opts.step_phase`.
inline double default_time_step(SpectralBounds const& bounds, ChebyshevOptions const& opts = {})
{
    return opts.step_phase / bounds.half_span();
}

inline PropagatorPlan plan_propagator(SpectralBounds const& bounds, double dt,
                                      ChebyshevOptions const& opts = {})
{
    if (!(bounds.half_span() > 0.0)) { throw NumericError("plan_propagator: degenerate spectral bounds"); }
    PropagatorPlan p;
    p.bounds = bounds;
    p.half_span = bounds.half_span();
    p.center = bounds.center();
    p.dt = dt;
    double const x = p.half_span * dt;
    double const ax = std::abs(x);
    int m = static_cast<int>(std::ceil(ax));
    while (std::abs(bessel_j(m, ax)) >= opts.tol) {
        ++m;
        if (m + opts.guard > opts.max_order) {
            std::ostringstream msg;
            msg << "plan_propagator: a*dt = " << ax << " needs order > " << opts.max_order;
            throw NumericError(msg.str());
        }
    }
    p.order = m + opts.guard;
    p.coeffs.resize(static_cast<std::size_t>(p.order) + 1);
    complex ipow{1.0, 0.0};
    for (int n = 0; n <= p.order; ++n) {
        p.coeffs[static_cast<std::size_t>(n)] = ipow * bessel_j(n, x);
        ipow *= complex(0.0, -1.0);
    }
    p.phase = std::exp(complex(0.0, -p.center * dt));
    return p;
}

template <class Scalar>
PropagatorPlan plan_propagator(SparseOperator<Scalar> const& op, double dt,
                               ChebyshevOptions const& opts = {})
{
    return plan_propagator(estimate_spectral_bounds(op), dt, opts);
}

namespace detail {

/// out = 2 * (H - b) x / a - prev, and acc += coeff * out; fused for one pass
/// over memory. With `first` set computes out = (H - b) x / a instead.
template <class Scalar, class C>
void chebyshev_fused(SparseOperator<Scalar> const& op, double a, double b,
                     complex const* x, complex const* prev, complex* out, bool first,
                     C coeff, complex* acc)
{
    auto offs = op.offsets();
    auto cols = op.columns();
    auto vals = op.values();
    double const s = first ? 1.0 / a : 2.0 / a;
    std::size_t const n = op.dim();
    for (std::size_t r = 0; r < n; ++r) {
        complex hx{};
        for (std::size_t k = offs[r]; k < offs[r + 1]; ++k) { hx += vals[k] * x[cols[k]]; }
        complex t = s * (hx - b * x[r]);
        if (!first) { t -= prev[r]; }
        out[r] = t;
        acc[r] += coeff * t;
    }
}

} // namespace detail

/// Reusable propagator: owns the two auxiliary vectors of the recursion.
template <class Scalar>
class ChebyshevPropagator {
  public:
    ChebyshevPropagator(SparseOperator<Scalar> const& op, PropagatorPlan plan)
        : op_{&op}, plan_{std::move(plan)}, t0_(op.dim()), t1_(op.dim()), acc_(op.dim())
    {
    }

    PropagatorPlan const& plan() const noexcept { return plan_; }

    /// state <- exp(-i H dt) state.
    void step(StateVector& state)
    {
        if (state.size() != op_->dim()) { throw DimensionError("step: state dimension mismatch"); }
        auto const& c = plan_.coeffs;
        double const a = plan_.half_span;
        double const b = plan_.center;
        for (std::size_t i = 0; i < state.size(); ++i) { acc_[i] = c[0] * state[i]; }
        if (plan_.order >= 1) {
            detail::chebyshev_fused(*op_, a, b, state.data(), nullptr, t1_.data(), true,
                                    2.0 * c[1], acc_.data());
            // T_{n-2} lives in `prev`, T_{n-1} in `cur`; the input state
            // doubles as scratch since the result accumulates in acc_.
            complex* prev = state.data();
            complex* cur = t1_.data();
            complex* spare = t0_.data();
            for (int n = 2; n <= plan_.order; ++n) {
                detail::chebyshev_fused(*op_, a, b, cur, prev, spare, false,
                                        2.0 * c[static_cast<std::size_t>(n)], acc_.data());
                complex* done = prev;
                prev = cur;
                cur = spare;
                spare = done;
            }
        }
        for (std::size_t i = 0; i < state.size(); ++i) { state[i] = plan_.phase * acc_[i]; }
    }

  private:
    SparseOperator<Scalar> const* op_;
    PropagatorPlan plan_;
    StateVector t0_, t1_, acc_;
};

/// One propagation step, returning a new vector.
template <class Scalar>
StateVector step(PropagatorPlan const& plan, SparseOperator<Scalar> const& op,
                 StateVector const& state)
{
    double const n = norm(state);
    if (std::abs(n - 1.0) > 1e-6) {
        std::clog << "spinbath: warning: step called on state with norm " << n << '\n';
    }
    StateVector out = state;
    ChebyshevPropagator<Scalar> prop(op, plan);
    prop.step(out);
    return out;
}

struct EvolutionOptions {
    ChebyshevOptions chebyshev{};
    /// Bounds to use; estimated from the operator when unset (half_span == 0).
    SpectralBounds bounds{};
    double max_norm_drift = 1e-8;
    double max_imag = 1e-10;
};

/// Expectation values on the grid plus the state at the final time.
struct Evolution {
    std::vector<double> values;
    StateVector final_state;
};

/// Called after every grid point with (grid index, time, value, state).
using EvolutionObserver = std::function<void(std::size_t, double, double, StateVector const&)>;

/// Propagates `state` across `t_grid` (need not start at 0) and records
/// <state(t)|observable|state(t)> at every grid point. Grid intervals longer
/// than the default step are split into equal sub-steps.
template <class Scalar, class ObsScalar>
Evolution evolve_on_grid(SparseOperator<Scalar> const& op, StateVector state,
                         std::vector<double> const& t_grid,
                         SparseOperator<ObsScalar> const& observable,
                         EvolutionOptions const& opts = {},
                         EvolutionObserver const& observer = {})
{
    if (state.size() != op.dim() || observable.dim() != op.dim()) {
        throw DimensionError("evolve: operator, observable and state dimensions differ");
    }
    // Descending grids run the evolution backwards in time.
    bool const ascending = t_grid.size() < 2 || t_grid[1] > t_grid[0];
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        bool const ok = ascending ? t_grid[k] > t_grid[k - 1] : t_grid[k] < t_grid[k - 1];
        if (!ok) { throw ConfigError("evolve: time grid must be strictly monotone"); }
    }
    SpectralBounds const bounds =
        opts.bounds.half_span() > 0.0 ? opts.bounds : estimate_spectral_bounds(op);
    double const max_dt = default_time_step(bounds, opts.chebyshev);
    double const norm0 = norm(state);

    std::map<double, ChebyshevPropagator<Scalar>> props;
    Evolution out;
    out.values.reserve(t_grid.size());
    auto record = [&](std::size_t k) {
        complex const e = expectation(observable, state);
        if (!std::isfinite(e.real()) || !std::isfinite(e.imag())) {
            std::ostringstream msg;
            msg << "evolve: non-finite expectation at grid index " << k;
            throw NumericError(msg.str());
        }
        if (std::abs(e.imag()) > opts.max_imag * std::max(1.0, std::abs(e.real()))) {
            std::ostringstream msg;
            msg << "evolve: expectation value has imaginary part " << e.imag() << " at t = "
                << t_grid[k];
            throw NumericError(msg.str());
        }
        out.values.push_back(e.real());
        if (observer) { observer(k, t_grid[k], e.real(), state); }
    };
    if (!t_grid.empty()) { record(0); }
    for (std::size_t k = 1; k < t_grid.size(); ++k) {
        double const span = t_grid[k] - t_grid[k - 1];
        auto const substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(std::abs(span) / max_dt)));
        double const dt = span / static_cast<double>(substeps);
        auto it = props.find(dt);
        if (it == props.end()) {
            it = props.emplace(dt, ChebyshevPropagator<Scalar>(op, plan_propagator(bounds, dt, opts.chebyshev))).first;
        }
        for (std::size_t s = 0; s < substeps; ++s) { it->second.step(state); }
        double const n = norm(state);
        if (!std::isfinite(n)) {
            std::ostringstream msg;
            msg << "evolve: NaN/Inf after step " << k;
            throw NumericError(msg.str());
        }
        if (std::abs(n - norm0) > opts.max_norm_drift) {
            std::ostringstream msg;
            msg << "evolve: norm drift " << std::abs(n - norm0) << " at t = " << t_grid[k]
                << " (under-resolved expansion)";
            throw NumericError(msg.str());
        }
        record(k);
    }
    out.final_state = std::move(state);
    return out;
}

/// evolve_on_grid with the grid anchored at t = 0.
template <class Scalar, class ObsScalar>
Evolution evolve(SparseOperator<Scalar> const& op, StateVector state,
                 std::vector<double> const& t_grid, SparseOperator<ObsScalar> const& observable,
                 EvolutionOptions const& opts = {})
{
    if (t_grid.empty() || t_grid.front() != 0.0) {
        throw ConfigError("evolve: time grid must start at 0");
    }
    return evolve_on_grid(op, std::move(state), t_grid, observable, opts);
}

/// Chebyshev series of the Gaussian exp(-(E' - E)^2 / (2 delta)) on the
/// rescaled axis; coeffs already include the factor 2 for n >= 1.
struct FilterPlan {
    SpectralBounds bounds;
    double energy = 0.0;
    double delta = 0.0;
    int order = 0;
    std::vector<double> coeffs;

    /// The truncated expansion at physical energy `e` (inside the bounds).
    double evaluate(double e) const
    {
        double const x = (e - bounds.center()) / bounds.half_span();
        double t0 = 1.0, t1 = x;
        double f = coeffs[0];
        if (order >= 1) { f += coeffs[1] * t1; }
        for (int n = 2; n <= order; ++n) {
            double const t2 = 2.0 * x * t1 - t0;
            f += coeffs[static_cast<std::size_t>(n)] * t2;
            t0 = t1;
            t1 = t2;
        }
        return f;
    }
};

struct FilterOptions {
    double tol = 1e-14;
    int guard = 5;
    int max_order = 20000;
};

/// Gauss-Chebyshev quadrature of the Gaussian against T_n, with the node
/// count doubled until it is at least twice the order the tolerance requires.
inline FilterPlan plan_gaussian_filter(SpectralBounds const& bounds, double energy, double delta,
                                       FilterOptions const& opts = {})
{
    if (!(delta > 0.0)) { throw ConfigError("plan_gaussian_filter: delta must be > 0"); }
    double const a = bounds.half_span();
    double const b = bounds.center();
    double const x0 = (energy - b) / a;
    double const var = delta / (a * a);
    auto f = [&](double x) { return std::exp(-(x - x0) * (x - x0) / (2.0 * var)); };

    int nodes = std::max(128, 4 * static_cast<int>(std::ceil(8.0 / std::sqrt(var))));
    for (;;) {
        if (nodes / 2 > opts.max_order + opts.guard) {
            std::ostringstream msg;
            msg << "plan_gaussian_filter: delta = " << delta << " over half-span " << a
                << " needs order above " << opts.max_order;
            throw NumericError(msg.str());
        }
        std::vector<double> fx(static_cast<std::size_t>(nodes)), theta(static_cast<std::size_t>(nodes));
        for (int k = 0; k < nodes; ++k) {
            theta[static_cast<std::size_t>(k)] = std::numbers::pi * (k + 0.5) / nodes;
            fx[static_cast<std::size_t>(k)] = f(std::cos(theta[static_cast<std::size_t>(k)]));
        }
        int const nmax = nodes / 2;
        std::vector<double> c(static_cast<std::size_t>(nmax));
        for (int n = 0; n < nmax; ++n) {
            double s = 0.0;
            for (int k = 0; k < nodes; ++k) {
                s += fx[static_cast<std::size_t>(k)] * std::cos(n * theta[static_cast<std::size_t>(k)]);
            }
            c[static_cast<std::size_t>(n)] = (n == 0 ? 1.0 : 2.0) * s / nodes;
        }
        int last = 0;
        for (int n = 0; n < nmax; ++n) {
            if (std::abs(c[static_cast<std::size_t>(n)]) > opts.tol) { last = n; }
        }
        int const order = last + opts.guard;
        if (2 * order <= nodes && order < nmax) {
            if (order > opts.max_order) {
                std::ostringstream msg;
                msg << "plan_gaussian_filter: required order " << order << " exceeds cap "
                    << opts.max_order;
                throw NumericError(msg.str());
            }
            FilterPlan p;
            p.bounds = bounds;
            p.energy = energy;
            p.delta = delta;
            p.order = order;
            p.coeffs.assign(c.begin(), c.begin() + order + 1);
            return p;
        }
        nodes *= 2;
    }
}

template <class Scalar>
FilterPlan plan_gaussian_filter(SparseOperator<Scalar> const& h_bath, double energy,
                                double delta, FilterOptions const& opts = {})
{
    return plan_gaussian_filter(estimate_spectral_bounds(h_bath), energy, delta, opts);
}

struct FilteredState {
    StateVector state;     ///< unnormalised
    double norm_squared = 0.0;
};

/// f(H) state via the three-term recursion.
template <class Scalar>
FilteredState apply_filter(FilterPlan const& plan, SparseOperator<Scalar> const& h,
                           StateVector const& state)
{
    if (state.size() != h.dim()) { throw DimensionError("apply_filter: dimension mismatch"); }
    std::size_t const n = state.size();
    double const a = plan.bounds.half_span();
    double const b = plan.bounds.center();
    StateVector acc(n), t_prev = state, t_cur(n), t_next(n);
    for (std::size_t i = 0; i < n; ++i) { acc[i] = plan.coeffs[0] * state[i]; }
    if (plan.order >= 1) {
        detail::chebyshev_fused(h, a, b, t_prev.data(), nullptr, t_cur.data(), true,
                                plan.coeffs[1], acc.data());
        for (int k = 2; k <= plan.order; ++k) {
            detail::chebyshev_fused(h, a, b, t_cur.data(), t_prev.data(), t_next.data(), false,
                                    plan.coeffs[static_cast<std::size_t>(k)], acc.data());
            std::swap(t_prev, t_cur);
            std::swap(t_cur, t_next);
        }
    }
    FilteredState out;
    out.norm_squared = 0.0;
    for (auto const& v : acc) { out.norm_squared += std::norm(v); }
    if (!std::isfinite(out.norm_squared)) { throw NumericError("apply_filter: non-finite result"); }
    if (std::sqrt(out.norm_squared) < 1e-14) {
        std::ostringstream msg;
        msg << "apply_filter: energy window at E = " << plan.energy
            << " is empty for this state (norm " << std::sqrt(out.norm_squared) << ")";
        throw EmptyWindowError(msg.str());
    }
    out.state = std::move(acc);
    return out;
}

} // namespace spinbath
