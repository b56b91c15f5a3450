#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "basis.hpp"
#include "chebyshev.hpp"
#include "error.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "time_series.hpp"

namespace spinbath {

/// Bath energy rule E = -0.15 (N - 1), i.e. -0.15 per bath spin.
inline double default_bath_energy(int num_spins) { return -0.15 * (num_spins - 1); }

/// System spin up, bath in a Gaussian window of variance `delta` around `energy`.
struct InitialStateSpec {
    double energy = 0.0;
    double delta = 0.1;
    double beta_target = 0.4; // informational only
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!(delta > 0.0)) { throw ConfigError("initial state: delta must be > 0"); }
        if (!std::isfinite(energy)) { throw ConfigError("initial state: energy must be finite"); }
    }
};

/// Normalised vector with i.i.d. complex Gaussian amplitudes (unit variance in
/// both real and imaginary part), i.e. a Haar-random state.
inline StateVector draw_haar_vector(std::size_t dim, std::uint64_t seed, std::uint64_t stream = 0)
{
    if (dim == 0) { throw DimensionError("draw_haar_vector: dim must be >= 1"); }
    auto gen = make_stream(seed, stream_tag::haar + stream);
    std::normal_distribution<double> gauss(0.0, 1.0);
    StateVector v(dim);
    for (auto& c : v) {
        double const re = gauss(gen);
        double const im = gauss(gen);
        c = complex(re, im);
    }
    double const n = norm(v);
    for (auto& c : v) { c /= n; }
    return v;
}

struct Projection {
    StateVector state;
    bool empty = false; ///< sector holds no system-up configuration
};

/// Zeroes every amplitude whose system spin (the highest bit) is down. No
/// renormalisation.
inline Projection project_system_up(StateVector state, MagnetizationSector const& sector)
{
    if (state.size() != sector.dim()) { throw DimensionError("project_system_up: dimension mismatch"); }
    int const sys = sector.num_spins() - 1;
    bool any_up = false;
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (((sector.config(i) >> sys) & 1U) == 0) { state[i] = 0.0; }
        else { any_up = true; }
    }
    return {std::move(state), !any_up};
}

/// Number of configurations in the sector with the system spin up.
inline std::size_t count_system_up(MagnetizationSector const& sector)
{
    if (sector.n_up() == 0) { return 0; }
    return static_cast<std::size_t>(binomial(sector.num_spins() - 1, sector.n_up() - 1));
}

struct PreparedMember {
    StateVector state;        ///< normalised
    double raw_weight = 0.0;  ///< dim * |f P phi|^2, estimates Tr(P f^2) in this sector
    double trace_f4 = 0.0;    ///< dim * |f^2 P phi|^2, estimates Tr(P f^4); 0 if not computed
};

/// normalize(f(H_bath) P_up phi) for a Haar vector phi drawn from stream
/// (seed, n_up). The filtered vector represents the sector block of
/// P_up f(H_bath)^2 (the square root of a projector is the projector itself;
/// for the Gaussian stand-in this fixes the represented ensemble).
inline PreparedMember prepare_member(MagnetizationSector const& sector,
                                     InitialStateSpec const& spec,
                                     RealOperator const& h_bath_sector, std::uint64_t seed,
                                     FilterOptions const& filter_opts = {},
                                     bool estimate_f4 = false)
{
    spec.validate();
    if (h_bath_sector.dim() != sector.dim()) {
        throw DimensionError("prepare_member: bath operator does not match sector");
    }
    auto proj = project_system_up(draw_haar_vector(sector.dim(), seed,
                                                   static_cast<std::uint64_t>(sector.n_up())),
                                  sector);
    if (proj.empty) { throw EmptyWindowError("prepare_member: sector has no system-up states"); }
    auto const plan = plan_gaussian_filter(h_bath_sector, spec.energy, spec.delta, filter_opts);
    auto filtered = apply_filter(plan, h_bath_sector, proj.state);
    PreparedMember m;
    m.raw_weight = static_cast<double>(sector.dim()) * filtered.norm_squared;
    if (estimate_f4) {
        auto twice = apply_filter(plan, h_bath_sector, filtered.state);
        m.trace_f4 = static_cast<double>(sector.dim()) * twice.norm_squared;
    }
    double const n = std::sqrt(filtered.norm_squared);
    m.state = std::move(filtered.state);
    for (auto& c : m.state) { c /= n; }
    return m;
}

struct EnsembleMember {
    MagnetizationSector sector;
    StateVector state;
    double raw_weight = 0.0;
    double weight = 0.0;
    double trace_f4 = 0.0;
};

/// Sector-resolved typical state; weights sum to one.
struct WeightedEnsemble {
    InitialStateSpec spec;
    std::vector<EnsembleMember> members;
    double d_eff_estimate = 0.0;
};

struct EnsembleOptions {
    FilterOptions filter{};
    int workers = 1;
    /// Sectors whose raw weight is below this fraction of the total are dropped.
    double min_relative_weight = 0.0;
};

/// Prepares one member per magnetisation sector (n_up >= 1). Sectors where the
/// filter empties the state are dropped.
inline WeightedEnsemble prepare_ensemble(LatticeSpec const& lattice, CouplingSpec const& couplings,
                                         InitialStateSpec const& spec,
                                         EnsembleOptions const& opts = {})
{
    spec.validate();
    auto sectors = enumerate_sectors(lattice);
    std::vector<std::optional<EnsembleMember>> slots(sectors.size());
    parallel_for(sectors.size(), opts.workers, [&](std::size_t i) {
        auto const& sector = sectors[i];
        if (sector.n_up() == 0) { return; }
        auto const hb = build_bath_hamiltonian(lattice, couplings, sector);
        try {
            auto m = prepare_member(sector, spec, hb, spec.seed, opts.filter, true);
            slots[i] = EnsembleMember{sector, std::move(m.state), m.raw_weight, 0.0, m.trace_f4};
        }
        catch (EmptyWindowError const&) {
        }
    });
    WeightedEnsemble ens;
    ens.spec = spec;
    double total = 0.0, f4 = 0.0;
    for (auto& s : slots) {
        if (s) {
            total += s->raw_weight;
            f4 += s->trace_f4;
        }
    }
    if (!(total > 0.0)) { throw EmptyWindowError("prepare_ensemble: every sector is empty"); }
    for (auto& s : slots) {
        if (s && s->raw_weight >= opts.min_relative_weight * total) {
            s->weight = s->raw_weight / total;
            ens.members.push_back(std::move(*s));
        }
    }
    double wsum = 0.0;
    for (auto const& m : ens.members) { wsum += m.weight; }
    for (auto& m : ens.members) { m.weight /= wsum; }
    ens.d_eff_estimate = f4 > 0.0 ? total * total / f4 : 0.0;
    return ens;
}

/// d_eff = (Tr rho~)^2 / Tr(rho~^2) with rho~ = P_up f^2, mean over Haar draws.
struct DeffEstimate {
    double value = 0.0;
    double std_error = 0.0;
    int draws = 0;
    bool unreliable = false; ///< relative standard error above 25 %
};

/// d_eff of rho ~ P_up f(H_bath)^2 from `draws` independent draws; each draw
/// estimates Tr(P f^2) and Tr(P f^4) sector by sector.
inline DeffEstimate effective_dimension(LatticeSpec const& lattice, CouplingSpec const& couplings,
                                        InitialStateSpec const& spec, int draws = 4,
                                        EnsembleOptions const& opts = {})
{
    if (draws < 1) { throw ConfigError("effective_dimension: draws must be >= 1"); }
    auto sectors = enumerate_sectors(lattice);
    std::vector<RealOperator> hb(sectors.size());
    std::vector<FilterPlan> plans(sectors.size());
    std::vector<bool> usable(sectors.size(), false);
    for (std::size_t i = 0; i < sectors.size(); ++i) {
        if (sectors[i].n_up() == 0) { continue; }
        hb[i] = build_bath_hamiltonian(lattice, couplings, sectors[i]);
        plans[i] = plan_gaussian_filter(hb[i], spec.energy, spec.delta, opts.filter);
        usable[i] = true;
    }
    std::vector<double> samples;
    for (int d = 0; d < draws; ++d) {
        std::uint64_t const seed = mix64(spec.seed ^ (0x9e37ULL + static_cast<std::uint64_t>(d)));
        double t2 = 0.0, t4 = 0.0;
        for (std::size_t i = 0; i < sectors.size(); ++i) {
            if (!usable[i]) { continue; }
            auto proj = project_system_up(
                draw_haar_vector(sectors[i].dim(), seed,
                                 stream_tag::trace_estimate + static_cast<std::uint64_t>(sectors[i].n_up())),
                sectors[i]);
            try {
                auto once = apply_filter(plans[i], hb[i], proj.state);
                auto twice = apply_filter(plans[i], hb[i], once.state);
                auto const dim = static_cast<double>(sectors[i].dim());
                t2 += dim * once.norm_squared;
                t4 += dim * twice.norm_squared;
            }
            catch (EmptyWindowError const&) {
            }
        }
        if (t4 > 0.0) { samples.push_back(t2 * t2 / t4); }
    }
    DeffEstimate out;
    out.draws = static_cast<int>(samples.size());
    if (samples.empty()) { throw EmptyWindowError("effective_dimension: empty window"); }
    double mean = 0.0;
    for (double s : samples) { mean += s; }
    mean /= static_cast<double>(samples.size());
    double var = 0.0;
    for (double s : samples) { var += (s - mean) * (s - mean); }
    if (samples.size() > 1) { var /= static_cast<double>(samples.size() - 1); }
    out.value = mean;
    out.std_error = std::sqrt(var / static_cast<double>(samples.size()));
    out.unreliable = samples.size() > 1 && out.std_error > 0.25 * mean;
    return out;
}

/// Weighted sum over sector evolutions of <S^z_sys(t)>.
inline TimeSeries evolve_ensemble(LatticeSpec const& lattice, CouplingSpec const& couplings,
                                  double lambda, WeightedEnsemble const& ensemble,
                                  std::vector<double> const& t_grid,
                                  EvolutionOptions const& opts = {}, int workers = 1)
{
    std::vector<std::vector<double>> parts(ensemble.members.size());
    parallel_for(ensemble.members.size(), workers, [&](std::size_t i) {
        auto const& m = ensemble.members[i];
        auto const h = build_total_hamiltonian(lattice, couplings, lambda, m.sector);
        auto const sz = system_sz(lattice, m.sector);
        parts[i] = evolve(h, m.state, t_grid, sz, opts).values;
    });
    TimeSeries ts;
    ts.times = t_grid;
    ts.values.assign(t_grid.size(), 0.0);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        for (std::size_t k = 0; k < t_grid.size(); ++k) {
            ts.values[k] += ensemble.members[i].weight * parts[i][k];
        }
    }
    ts.meta.N = lattice.num_spins();
    ts.meta.L = lattice.L;
    ts.meta.lambda = lambda;
    ts.meta.seed = ensemble.spec.seed;
    ts.meta.coupling_mode = to_string(couplings.mode);
    return ts;
}

/// Spread of <S^z_sys(t*)> across typicality seeds for one window width.
struct TypicalityError {
    double delta = 0.0;
    double d_eff = 0.0;
    double mean = 0.0;
    double std = 0.0;
    int n_draws = 0;
    std::vector<double> samples;
};

/// For every window width: `n_seeds` independent typical states evolved to
/// `probe_time`, their spread, and the mean d_eff estimate.
inline std::vector<TypicalityError>
typicality_error_scaling(LatticeSpec const& lattice, CouplingSpec const& couplings,
                         InitialStateSpec const& spec, double lambda, int n_seeds,
                         std::vector<double> const& window_sizes, double probe_time,
                         EnsembleOptions const& opts = {})
{
    if (n_seeds < 10) { throw ConfigError("typicality_error_scaling: need at least 10 seeds"); }
    std::vector<TypicalityError> out;
    for (double delta : window_sizes) {
        TypicalityError te;
        te.delta = delta;
        double deff = 0.0;
        for (int s = 0; s < n_seeds; ++s) {
            InitialStateSpec sp = spec;
            sp.delta = delta;
            sp.seed = mix64(spec.seed + 1000003ULL * static_cast<std::uint64_t>(s + 1));
            auto ens = prepare_ensemble(lattice, couplings, sp, opts);
            deff += ens.d_eff_estimate;
            auto ts = evolve_ensemble(lattice, couplings, lambda, ens, {0.0, probe_time}, {},
                                      opts.workers);
            te.samples.push_back(ts.values.back());
        }
        te.n_draws = n_seeds;
        te.d_eff = deff / n_seeds;
        for (double v : te.samples) { te.mean += v; }
        te.mean /= n_seeds;
        for (double v : te.samples) { te.std += (v - te.mean) * (v - te.mean); }
        te.std = std::sqrt(te.std / (n_seeds - 1));
        out.push_back(std::move(te));
    }
    return out;
}

} // namespace spinbath
