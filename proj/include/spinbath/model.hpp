#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "basis.hpp"
#include "error.hpp"
#include "random.hpp"
#include "sparse_operator.hpp"

namespace spinbath {

/// 3 x L bath wheel plus one system spin.
///
/// Bath site (i, r), i in [1, L], r in [1, 3], is spin 3(i-1) + (r-1); the
/// system spin is the highest bit, spin 3L. With this layout a bath-only
/// configuration is the low 3L bits of a full configuration.
struct LatticeSpec {
    int L = 3;
    bool periodic = true;

    int num_spins() const noexcept { return 3 * L + 1; }
    int bath_spins() const noexcept { return 3 * L; }
    int system_site() const noexcept { return 3 * L; }

    int bath_site(int i, int r) const
    {
        if (i < 1 || i > L || r < 1 || r > 3) {
            std::ostringstream msg;
            msg << "bath site (" << i << ", " << r << ") outside 3 x " << L << " lattice";
            throw ConfigError(msg.str());
        }
        return 3 * (i - 1) + (r - 1);
    }

    void validate() const
    {
        if (L < 2) {
            throw ConfigError("lattice circumference L must be >= 2 (L = 1 turns the ring "
                              "into self-bonds)");
        }
        if (num_spins() > 30) { throw ConfigError("more than 30 spins not supported"); }
    }
};

enum class CouplingMode { uniform, random };

inline std::string to_string(CouplingMode m) { return m == CouplingMode::uniform ? "uniform" : "random"; }

inline CouplingMode coupling_mode_from_string(std::string const& s)
{
    if (s == "uniform") { return CouplingMode::uniform; }
    if (s == "random") { return CouplingMode::random; }
    throw ConfigError("unknown coupling mode '" + s + "'");
}

struct CouplingSpec {
    CouplingMode mode = CouplingMode::uniform;
    double J = 1.0;
    /// Random mode: bath bonds are random_mean + random_std * N(0, 1).
    double random_std = 0.2;
    double random_mean = 1.0;
    /// Zeeman field on the system spin.
    double B = 0.5;
    std::uint64_t seed = 0;

    void validate() const
    {
        if (mode == CouplingMode::uniform && !(J > 0.0)) {
            throw ConfigError("uniform coupling J must be > 0");
        }
        if (mode == CouplingMode::random && !(random_std > 0.0)) {
            throw ConfigError("random coupling std must be > 0");
        }
    }
};

/// Isotropic exchange coupling * (S_a . S_b).
struct Bond {
    int a;
    int b;
    double coupling;
};

/// field * S^z_site.
struct Field {
    int site;
    double field;
};

/// Heisenberg-type operator: sum of isotropic bonds and z fields.
struct SpinTerms {
    int num_spins = 0;
    std::vector<Bond> bonds;
    std::vector<Field> fields;

    SpinTerms& operator+=(SpinTerms const& other)
    {
        if (other.num_spins != num_spins) { throw DimensionError("SpinTerms: spin count mismatch"); }
        bonds.insert(bonds.end(), other.bonds.begin(), other.bonds.end());
        fields.insert(fields.end(), other.fields.begin(), other.fields.end());
        return *this;
    }

    SpinTerms scaled(double s) const
    {
        SpinTerms out = *this;
        for (auto& b : out.bonds) { b.coupling *= s; }
        for (auto& f : out.fields) { f.field *= s; }
        return out;
    }
};

/// Bath bonds in summation order: three longitudinal rings (i -> i+1, with
/// L+1 == 1), then rungs (i,1)-(i,2) and (i,2)-(i,3).
inline std::vector<Bond> bath_bonds(LatticeSpec const& lattice, CouplingSpec const& couplings)
{
    lattice.validate();
    couplings.validate();
    std::vector<Bond> bonds;
    int const L = lattice.L;
    for (int r = 1; r <= 3; ++r) {
        for (int i = 1; i <= L; ++i) {
            if (!lattice.periodic && i == L) { continue; }
            int const next = i == L ? 1 : i + 1;
            bonds.push_back({lattice.bath_site(i, r), lattice.bath_site(next, r), couplings.J});
        }
    }
    for (int i = 1; i <= L; ++i) {
        bonds.push_back({lattice.bath_site(i, 1), lattice.bath_site(i, 2), couplings.J});
    }
    for (int i = 1; i <= L; ++i) {
        bonds.push_back({lattice.bath_site(i, 2), lattice.bath_site(i, 3), couplings.J});
    }
    if (couplings.mode == CouplingMode::random) {
        auto gen = make_stream(couplings.seed, stream_tag::couplings);
        std::normal_distribution<double> gauss(couplings.random_mean, couplings.random_std);
        for (auto& b : bonds) { b.coupling = gauss(gen); }
    }
    return bonds;
}

inline SpinTerms bath_terms(LatticeSpec const& lattice, CouplingSpec const& couplings,
                            int num_spins)
{
    return SpinTerms{num_spins, bath_bonds(lattice, couplings), {}};
}

/// Bath terms acting on the full N-spin space (identity on the system spin).
inline SpinTerms bath_terms(LatticeSpec const& lattice, CouplingSpec const& couplings)
{
    return bath_terms(lattice, couplings, lattice.num_spins());
}

inline SpinTerms system_terms(LatticeSpec const& lattice, CouplingSpec const& couplings)
{
    lattice.validate();
    return SpinTerms{lattice.num_spins(), {}, {{lattice.system_site(), couplings.B}}};
}

/// System spin coupled isotropically to the three spins of column i = 1.
inline SpinTerms interaction_terms(LatticeSpec const& lattice)
{
    lattice.validate();
    SpinTerms t{lattice.num_spins(), {}, {}};
    for (int r = 1; r <= 3; ++r) {
        t.bonds.push_back({lattice.system_site(), lattice.bath_site(1, r), 1.0});
    }
    return t;
}

/// H_sys + H_bath + lambda * H_int as one term list.
inline SpinTerms total_terms(LatticeSpec const& lattice, CouplingSpec const& couplings,
                             double lambda)
{
    SpinTerms t = system_terms(lattice, couplings);
    t += bath_terms(lattice, couplings);
    t += interaction_terms(lattice).scaled(lambda);
    return t;
}

/// Compiles terms into a real sparse matrix on the given basis (FullBasis or
/// MagnetizationSector). Every term conserves total S^z, so the sector basis
/// is closed under the off-diagonal flips.
template <class Basis>
RealOperator build_operator(SpinTerms const& terms, Basis const& basis)
{
    if (basis.num_spins() != terms.num_spins) {
        throw DimensionError("build_operator: basis and terms disagree on spin count");
    }
    for (auto const& b : terms.bonds) {
        if (b.a == b.b || b.a < 0 || b.b < 0 || b.a >= terms.num_spins || b.b >= terms.num_spins) {
            throw ConfigError("invalid bond");
        }
    }
    std::size_t const dim = basis.dim();
    std::vector<std::size_t> offsets(dim + 1, 0);
    std::vector<std::uint32_t> cols;
    std::vector<double> vals;
    cols.reserve(dim * (1 + terms.bonds.size() / 2));
    vals.reserve(cols.capacity());
    std::vector<std::pair<std::uint32_t, double>> row;
    for (std::size_t i = 0; i < dim; ++i) {
        Config const c = basis.config(i);
        row.clear();
        double diag = 0.0;
        for (auto const& f : terms.fields) { diag += f.field * (((c >> f.site) & 1U) ? 0.5 : -0.5); }
        for (auto const& b : terms.bonds) {
            bool const ua = (c >> b.a) & 1U;
            bool const ub = (c >> b.b) & 1U;
            if (ua == ub) { diag += 0.25 * b.coupling; }
            else {
                diag -= 0.25 * b.coupling;
                Config const flipped = c ^ ((Config{1} << b.a) | (Config{1} << b.b));
                row.emplace_back(static_cast<std::uint32_t>(basis.index(flipped)), 0.5 * b.coupling);
            }
        }
        row.emplace_back(static_cast<std::uint32_t>(i), diag);
        std::sort(row.begin(), row.end());
        for (std::size_t k = 0; k < row.size();) {
            std::size_t j = k;
            double sum = 0.0;
            while (j < row.size() && row[j].first == row[k].first) { sum += row[j++].second; }
            if (sum != 0.0) {
                cols.push_back(row[k].first);
                vals.push_back(sum);
            }
            k = j;
        }
        offsets[i + 1] = cols.size();
    }
    return RealOperator::from_csr(dim, std::move(offsets), std::move(cols), std::move(vals), true);
}

/// Where the bath Hamiltonian lives.
enum class BathSpace {
    full,      ///< 2^N space, identity on the system spin
    bath_only, ///< 2^(N-1) space of the bath spins alone
};

inline RealOperator build_bath_hamiltonian(LatticeSpec const& lattice,
                                           CouplingSpec const& couplings,
                                           BathSpace space = BathSpace::full)
{
    int const n = space == BathSpace::full ? lattice.num_spins() : lattice.bath_spins();
    return build_operator(bath_terms(lattice, couplings, n), FullBasis(n));
}

inline RealOperator build_bath_hamiltonian(LatticeSpec const& lattice,
                                           CouplingSpec const& couplings,
                                           MagnetizationSector const& sector)
{
    return build_operator(bath_terms(lattice, couplings, sector.num_spins()), sector);
}

/// B S^z on a lone spin-1/2.
inline RealOperator build_system_hamiltonian(CouplingSpec const& couplings)
{
    return build_operator(SpinTerms{1, {}, {{0, couplings.B}}}, FullBasis(1));
}

inline RealOperator build_system_hamiltonian(LatticeSpec const& lattice,
                                             CouplingSpec const& couplings)
{
    return build_operator(system_terms(lattice, couplings), FullBasis(lattice.num_spins()));
}

inline RealOperator build_system_hamiltonian(LatticeSpec const& lattice,
                                             CouplingSpec const& couplings,
                                             MagnetizationSector const& sector)
{
    return build_operator(system_terms(lattice, couplings), sector);
}

inline RealOperator build_interaction_hamiltonian(LatticeSpec const& lattice)
{
    return build_operator(interaction_terms(lattice), FullBasis(lattice.num_spins()));
}

inline RealOperator build_interaction_hamiltonian(LatticeSpec const& lattice,
                                                  MagnetizationSector const& sector)
{
    return build_operator(interaction_terms(lattice), sector);
}

/// h_sys + h_bath + lambda * h_int.
inline RealOperator assemble_total(RealOperator const& h_sys, RealOperator const& h_bath,
                                   RealOperator const& h_int, double lambda)
{
    if (h_sys.dim() != h_bath.dim() || h_sys.dim() != h_int.dim()) {
        std::ostringstream msg;
        msg << "assemble_total: dimensions " << h_sys.dim() << ", " << h_bath.dim() << ", "
            << h_int.dim();
        throw DimensionError(msg.str());
    }
    return add(add(h_sys, h_bath), h_int, lambda);
}

/// Total Hamiltonian compiled straight into one sector (no full-space detour).
inline RealOperator build_total_hamiltonian(LatticeSpec const& lattice,
                                            CouplingSpec const& couplings, double lambda,
                                            MagnetizationSector const& sector)
{
    return build_operator(total_terms(lattice, couplings, lambda), sector);
}

inline RealOperator build_total_hamiltonian(LatticeSpec const& lattice,
                                            CouplingSpec const& couplings, double lambda)
{
    return build_operator(total_terms(lattice, couplings, lambda), FullBasis(lattice.num_spins()));
}

inline std::vector<MagnetizationSector> enumerate_sectors(LatticeSpec const& lattice)
{
    lattice.validate();
    return enumerate_sectors(lattice.num_spins());
}

/// S^z of a single site, diagonal in the Ising basis.
template <class Basis>
RealOperator site_sz(int site, Basis const& basis)
{
    return build_operator(SpinTerms{basis.num_spins(), {}, {{site, 1.0}}}, basis);
}

template <class Basis>
RealOperator total_sz(Basis const& basis)
{
    SpinTerms t{basis.num_spins(), {}, {}};
    for (int s = 0; s < basis.num_spins(); ++s) { t.fields.push_back({s, 1.0}); }
    return build_operator(t, basis);
}

inline RealOperator system_sz(LatticeSpec const& lattice)
{
    return site_sz(lattice.system_site(), FullBasis(lattice.num_spins()));
}

inline RealOperator system_sz(LatticeSpec const& lattice, MagnetizationSector const& sector)
{
    return site_sz(lattice.system_site(), sector);
}

enum class Axis { x, y, z };

/// S^{x,y,z} of one site on the full space. Only S^z conserves magnetization.
inline ComplexOperator site_spin(int num_spins, int site, Axis axis)
{
    FullBasis basis(num_spins);
    std::vector<ComplexOperator::Entry> e;
    for (std::size_t i = 0; i < basis.dim(); ++i) {
        bool const up = (i >> site) & 1U;
        std::size_t const j = i ^ (std::size_t{1} << site);
        switch (axis) {
        case Axis::z: e.push_back({i, i, complex(up ? 0.5 : -0.5)}); break;
        case Axis::x: e.push_back({i, j, complex(0.5)}); break;
        // <j|S^y|i>: S^y|down> = -i/2 |up>, S^y|up> = i/2 |down>.
        case Axis::y: e.push_back({j, i, up ? complex(0, 0.5) : complex(0, -0.5)}); break;
        }
    }
    return ComplexOperator::assemble(basis.dim(), std::move(e), true);
}

} // namespace spinbath
