#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <vector>

#include "error.hpp"
#include "sparse_operator.hpp"

namespace spinbath {

using Config = std::uint64_t;

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// Binomial coefficient for small arguments (n <= 62).
constexpr std::uint64_t binomial(int n, int k) noexcept
{
    if (k < 0 || k > n) { return 0; }
    if (k > n - k) { k = n - k; }
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    }
    return r;
}

/// The whole 2^N dimensional Ising basis; state index equals bit pattern.
class FullBasis {
  public:
    explicit FullBasis(int num_spins) : num_spins_{num_spins}
    {
        if (num_spins < 1 || num_spins > 30) {
            throw ConfigError("FullBasis supports 1..30 spins");
        }
    }
    int num_spins() const noexcept { return num_spins_; }
    std::size_t dim() const noexcept { return std::size_t{1} << num_spins_; }
    Config config(std::size_t i) const noexcept { return i; }
    std::size_t index(Config c) const noexcept { return c < dim() ? c : npos; }

  private:
    int num_spins_;
};

/// Ising configurations with exactly `n_up` up spins (bit set = up), ordered
/// by their integer value.
class MagnetizationSector {
  public:
    MagnetizationSector(int num_spins, int n_up) : num_spins_{num_spins}, n_up_{n_up}
    {
        if (num_spins < 1 || num_spins > 62) {
            throw ConfigError("MagnetizationSector supports 1..62 spins");
        }
        if (n_up < 0 || n_up > num_spins) {
            throw ConfigError("n_up outside [0, num_spins]");
        }
        dim_ = static_cast<std::size_t>(binomial(num_spins, n_up));
        configs_.reserve(dim_);
        if (n_up == 0) { configs_.push_back(0); }
        else {
            // Gosper's hack enumerates fixed-popcount patterns in increasing order.
            Config c = (Config{1} << n_up) - 1;
            Config const limit = Config{1} << num_spins;
            while (c < limit) {
                configs_.push_back(c);
                Config const u = c & (~c + 1);
                Config const v = c + u;
                c = v + (((v ^ c) / u) >> 2);
            }
        }
    }

    int num_spins() const noexcept { return num_spins_; }
    int n_up() const noexcept { return n_up_; }
    std::size_t dim() const noexcept { return dim_; }
    /// Total S^z eigenvalue of every state in the sector.
    double magnetization() const noexcept { return n_up_ - 0.5 * num_spins_; }

    Config config(std::size_t i) const noexcept { return configs_[i]; }
    std::span<Config const> configs() const noexcept { return configs_; }

    /// Position of `c` within the sector, or npos. Uses the combinatorial
    /// number system, which is monotone in the bit pattern.
    std::size_t index(Config c) const noexcept
    {
        if (std::popcount(c) != n_up_ || (c >> num_spins_) != 0) { return npos; }
        std::size_t rank = 0;
        int k = 1;
        while (c != 0) {
            int const pos = std::countr_zero(c);
            rank += static_cast<std::size_t>(binomial(pos, k));
            ++k;
            c &= c - 1;
        }
        return rank;
    }

  private:
    int num_spins_;
    int n_up_;
    std::size_t dim_ = 0;
    std::vector<Config> configs_;
};

/// All N+1 magnetization sectors, ordered by n_up.
inline std::vector<MagnetizationSector> enumerate_sectors(int num_spins)
{
    std::vector<MagnetizationSector> out;
    out.reserve(static_cast<std::size_t>(num_spins) + 1);
    for (int n = 0; n <= num_spins; ++n) { out.emplace_back(num_spins, n); }
    return out;
}

/// Restricts a full-space operator to one sector. Rejects operators with any
/// matrix element connecting different magnetizations.
template <class Scalar>
SparseOperator<Scalar> restrict_to_sector(SparseOperator<Scalar> const& op,
                                          MagnetizationSector const& sector)
{
    std::size_t const full = std::size_t{1} << sector.num_spins();
    if (op.dim() != full) {
        std::ostringstream msg;
        msg << "restrict_to_sector: operator dim " << op.dim() << " is not 2^"
            << sector.num_spins();
        throw DimensionError(msg.str());
    }
    auto offs = op.offsets();
    auto cols = op.columns();
    auto vals = op.values();
    for (std::size_t r = 0; r < op.dim(); ++r) {
        for (std::size_t k = offs[r]; k < offs[r + 1]; ++k) {
            if (std::popcount(static_cast<Config>(r)) != std::popcount(static_cast<Config>(cols[k]))) {
                std::ostringstream msg;
                msg << "operator couples sectors: entry (" << r << ", " << cols[k] << ")";
                throw SectorError(msg.str());
            }
        }
    }
    std::vector<std::size_t> offsets(sector.dim() + 1, 0);
    std::vector<std::uint32_t> out_cols;
    std::vector<Scalar> out_vals;
    for (std::size_t i = 0; i < sector.dim(); ++i) {
        Config const row = sector.config(i);
        for (std::size_t k = offs[row]; k < offs[row + 1]; ++k) {
            out_cols.push_back(static_cast<std::uint32_t>(sector.index(cols[k])));
            out_vals.push_back(vals[k]);
        }
        offsets[i + 1] = out_cols.size();
    }
    // Sector order is monotone in the bit pattern, so column order survives.
    return SparseOperator<Scalar>::from_csr(sector.dim(), std::move(offsets),
                                            std::move(out_cols), std::move(out_vals),
                                            op.hermitian());
}

/// Copies a sector vector into its slots of a full-space vector.
template <class V>
void scatter(MagnetizationSector const& sector, std::span<V const> part, std::span<V> full)
{
    for (std::size_t i = 0; i < sector.dim(); ++i) { full[sector.config(i)] = part[i]; }
}

template <class V>
std::vector<V> gather(MagnetizationSector const& sector, std::span<V const> full)
{
    std::vector<V> part(sector.dim());
    for (std::size_t i = 0; i < sector.dim(); ++i) { part[i] = full[sector.config(i)]; }
    return part;
}

} // namespace spinbath
