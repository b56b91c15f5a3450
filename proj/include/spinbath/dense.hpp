#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "basis.hpp"
#include "error.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "sparse_operator.hpp"

namespace spinbath {

using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

/// Per-sector dense blocks, indexed like the sector list they came from.
using DenseBlocks = std::vector<DenseMatrix>;
using SparseBlocks = std::vector<RealOperator>;

inline DenseMatrix to_dense(RealOperator const& op)
{
    DenseMatrix m = DenseMatrix::Zero(static_cast<Eigen::Index>(op.dim()),
                                      static_cast<Eigen::Index>(op.dim()));
    auto const off = op.offsets();
    auto const col = op.columns();
    auto const val = op.values();
    for (std::size_t r = 0; r < op.dim(); ++r) {
        for (std::size_t k = off[r]; k < off[r + 1]; ++k) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(col[k])) = val[k];
        }
    }
    return m;
}

/// op * x for a sparse op and a dense matrix.
inline DenseMatrix sparse_times_dense(RealOperator const& op, DenseMatrix const& x)
{
    if (static_cast<std::size_t>(x.rows()) != op.dim()) {
        throw DimensionError("sparse_times_dense: dimension mismatch");
    }
    DenseMatrix y = DenseMatrix::Zero(x.rows(), x.cols());
    auto const off = op.offsets();
    auto const col = op.columns();
    auto const val = op.values();
    for (std::size_t r = 0; r < op.dim(); ++r) {
        auto row = y.row(static_cast<Eigen::Index>(r));
        for (std::size_t k = off[r]; k < off[r + 1]; ++k) {
            row += val[k] * x.row(static_cast<Eigen::Index>(col[k]));
        }
    }
    return y;
}

/// Eigenpairs of one block, ascending.
struct SectorSpectrum {
    int n_up = -1; ///< -1 for an operator that was not split into sectors
    DenseVector energies;
    DenseMatrix vectors;
};

struct SpectralData {
    std::vector<SectorSpectrum> blocks;
    double degeneracy_tol = 0.0;

    std::size_t dim() const
    {
        std::size_t d = 0;
        for (auto const& b : blocks) { d += static_cast<std::size_t>(b.energies.size()); }
        return d;
    }

    /// All eigenvalues, merged and sorted.
    std::vector<double> eigenvalues() const
    {
        std::vector<double> e;
        e.reserve(dim());
        for (auto const& b : blocks) { e.insert(e.end(), b.energies.begin(), b.energies.end()); }
        std::sort(e.begin(), e.end());
        return e;
    }

    double span() const
    {
        auto const e = eigenvalues();
        return e.empty() ? 0.0 : e.back() - e.front();
    }
};

struct DiagonalizeOptions {
    std::size_t cap = 8192; ///< largest dense block
    double degeneracy_rel_tol = 1e-12;
    int workers = 1;
};

inline SectorSpectrum diagonalize_block(RealOperator const& op, int n_up, std::size_t cap)
{
    if (op.dim() > cap) {
        std::ostringstream msg;
        msg << "diagonalize: block dimension " << op.dim() << " exceeds the cap " << cap;
        throw DimensionError(msg.str());
    }
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(to_dense(op));
    if (es.info() != Eigen::Success) { throw NumericError("diagonalize: eigensolver failed"); }
    return {n_up, es.eigenvalues(), es.eigenvectors()};
}

/// Dense eigendecomposition of each block; `n_up` labels the blocks.
inline SpectralData diagonalize(SparseBlocks const& blocks, std::vector<int> const& n_up,
                                DiagonalizeOptions const& opts = {})
{
    if (blocks.size() != n_up.size()) { throw DimensionError("diagonalize: label count mismatch"); }
    SpectralData out;
    out.blocks.resize(blocks.size());
    parallel_for(blocks.size(), opts.workers,
                 [&](std::size_t i) { out.blocks[i] = diagonalize_block(blocks[i], n_up[i], opts.cap); });
    out.degeneracy_tol = opts.degeneracy_rel_tol * out.span();
    return out;
}

inline SpectralData diagonalize(RealOperator const& op, DiagonalizeOptions const& opts = {})
{
    return diagonalize(SparseBlocks{op}, {-1}, opts);
}

/// Operators of one lattice model, split into magnetisation sectors.
struct SectorModel {
    LatticeSpec lattice;
    CouplingSpec couplings;
    double lambda = 0.0;
    std::vector<MagnetizationSector> sectors;
    SparseBlocks h0, h_int, h, h_bath, a;

    std::vector<int> labels() const
    {
        std::vector<int> l;
        for (auto const& s : sectors) { l.push_back(s.n_up()); }
        return l;
    }
};

/// H0 = H_sys + H_bath, H_int, H = H0 + lambda H_int and A = S^z_sys per sector.
inline SectorModel build_sector_model(LatticeSpec const& lattice, CouplingSpec const& couplings,
                                      double lambda)
{
    SectorModel m{lattice, couplings, lambda, enumerate_sectors(lattice), {}, {}, {}, {}, {}};
    for (auto const& s : m.sectors) {
        auto hb = build_bath_hamiltonian(lattice, couplings, s);
        auto hs = build_system_hamiltonian(lattice, couplings, s);
        auto hi = build_interaction_hamiltonian(lattice, s);
        m.h0.push_back(add(hs, hb));
        m.h.push_back(assemble_total(hs, hb, hi, lambda));
        m.h_int.push_back(std::move(hi));
        m.h_bath.push_back(std::move(hb));
        m.a.push_back(system_sz(lattice, s));
    }
    return m;
}

/// Same model with every Hamiltonian block multiplied by s.
inline SectorModel scaled(SectorModel m, double s)
{
    for (auto* blocks : {&m.h0, &m.h_int, &m.h, &m.h_bath}) {
        for (auto& b : *blocks) { b = b.scaled(s); }
    }
    return m;
}

inline double trace(DenseBlocks const& rho)
{
    double t = 0.0;
    for (auto const& b : rho) { t += b.trace(); }
    return t;
}

/// Checks unit trace, symmetry and positivity within `tol`.
inline void validate_density(DenseBlocks const& rho, double tol = 1e-10)
{
    double const t = trace(rho);
    if (std::abs(t - 1.0) > tol) {
        std::ostringstream msg;
        msg << "density: trace " << t << " differs from 1";
        throw NumericError(msg.str());
    }
    for (auto const& b : rho) {
        if ((b - b.transpose()).cwiseAbs().maxCoeff() > tol) { throw NumericError("density: not symmetric"); }
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(b, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -tol) { throw NumericError("density: not positive"); }
    }
}

/// Indices of configurations with the system spin (highest bit) up.
inline std::vector<Eigen::Index> system_up_indices(MagnetizationSector const& sector)
{
    std::vector<Eigen::Index> idx;
    int const sys = sector.num_spins() - 1;
    for (std::size_t i = 0; i < sector.dim(); ++i) {
        if ((sector.config(i) >> sys) & 1U) { idx.push_back(static_cast<Eigen::Index>(i)); }
    }
    return idx;
}

/// H_bath restricted to the system-up configurations of each sector, diagonalised.
struct BathWindowSpectrum {
    std::vector<std::vector<Eigen::Index>> up_indices;
    std::vector<DenseVector> energies;
    std::vector<DenseMatrix> vectors;
};

inline BathWindowSpectrum diagonalize_bath_up(SectorModel const& m, int workers = 1)
{
    BathWindowSpectrum out;
    auto const n = m.sectors.size();
    out.up_indices.resize(n);
    out.energies.resize(n);
    out.vectors.resize(n);
    parallel_for(n, workers, [&](std::size_t i) {
        out.up_indices[i] = system_up_indices(m.sectors[i]);
        auto const& idx = out.up_indices[i];
        if (idx.empty()) { return; }
        DenseMatrix const full = to_dense(m.h_bath[i]);
        DenseMatrix const sub = full(idx, idx);
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(sub);
        out.energies[i] = es.eigenvalues();
        out.vectors[i] = es.eigenvectors();
    });
    return out;
}

inline double gaussian_window(double e, double energy, double delta)
{
    return std::exp(-(e - energy) * (e - energy) / (2.0 * delta));
}

/// rho = P_up f(H_bath)^2 / Tr, f the Gaussian window of variance delta.
/// This is the ensemble a filtered typical state represents.
inline DenseBlocks product_state_rho(SectorModel const& m, BathWindowSpectrum const& bath,
                                     double energy, double delta)
{
    DenseBlocks rho(m.sectors.size());
    double total = 0.0;
    for (std::size_t i = 0; i < m.sectors.size(); ++i) {
        auto const d = static_cast<Eigen::Index>(m.sectors[i].dim());
        rho[i] = DenseMatrix::Zero(d, d);
        auto const& idx = bath.up_indices[i];
        if (idx.empty()) { continue; }
        DenseVector f2 = bath.energies[i].unaryExpr(
            [&](double e) { return std::pow(gaussian_window(e, energy, delta), 2); });
        DenseMatrix const& v = bath.vectors[i];
        DenseMatrix const sub = v * f2.asDiagonal() * v.transpose();
        rho[i](idx, idx) = sub;
        total += sub.trace();
    }
    if (!(total > 0.0)) { throw EmptyWindowError("product_state_rho: window holds no states"); }
    for (auto& b : rho) { b /= total; }
    return rho;
}

/// Exact d_eff = (Tr rho~)^2 / Tr(rho~^2) for rho~ = P_up f(H_bath)^2.
inline double exact_effective_dimension(BathWindowSpectrum const& bath, double energy, double delta)
{
    double t2 = 0.0, t4 = 0.0;
    for (auto const& e : bath.energies) {
        for (Eigen::Index j = 0; j < e.size(); ++j) {
            double const f2 = std::pow(gaussian_window(e[j], energy, delta), 2);
            t2 += f2;
            t4 += f2 * f2;
        }
    }
    if (!(t4 > 0.0)) { throw EmptyWindowError("exact_effective_dimension: empty window"); }
    return t2 * t2 / t4;
}

/// rho = (A + 1/2) / dim_bath, the infinite-temperature state with the
/// system spin polarised along A = S^z_sys.
inline DenseBlocks infinite_temperature_rho(SparseBlocks const& a, std::size_t dim_bath)
{
    if (dim_bath == 0) { throw DimensionError("infinite_temperature_rho: dim_bath must be >= 1"); }
    DenseBlocks rho;
    for (auto const& b : a) {
        DenseMatrix m = to_dense(b);
        m.diagonal().array() += 0.5;
        rho.push_back(m / static_cast<double>(dim_bath));
    }
    return rho;
}

/// V^T X V for every block.
inline DenseBlocks to_eigenbasis(DenseBlocks const& x, SpectralData const& spec)
{
    if (x.size() != spec.blocks.size()) { throw DimensionError("to_eigenbasis: block count mismatch"); }
    DenseBlocks out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto const& v = spec.blocks[i].vectors;
        out[i] = v.transpose() * x[i] * v;
    }
    return out;
}

inline DenseBlocks to_eigenbasis(SparseBlocks const& x, SpectralData const& spec)
{
    if (x.size() != spec.blocks.size()) { throw DimensionError("to_eigenbasis: block count mismatch"); }
    DenseBlocks out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto const& v = spec.blocks[i].vectors;
        out[i] = v.transpose() * sparse_times_dense(x[i], v);
    }
    return out;
}

/// Largest |eigenvalue| over all blocks.
inline double operator_norm(SparseBlocks const& a)
{
    double n = 0.0;
    for (auto const& b : a) {
        Eigen::SelfAdjointEigenSolver<DenseMatrix> es(to_dense(b), Eigen::EigenvaluesOnly);
        n = std::max(n, es.eigenvalues().cwiseAbs().maxCoeff());
    }
    return n;
}

} // namespace spinbath
