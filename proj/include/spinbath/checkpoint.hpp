#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "sparse_operator.hpp"

namespace spinbath {

/// Saved propagation state of one magnetisation sector.
///
/// On-disk layout (little-endian, no padding):
///
///   offset  size   field
///   0       8      magic "SBCKPT01"
///   8       4      format version (uint32, currently 1)
///   12      4      sector id = n_up (int32)
///   16      8      time t (float64)
///   24      8      grid index of t (uint64)
///   32      8      rng seed of the typical state (uint64)
///   40      8      propagator plan hash (uint64)
///   48      8      dim (uint64)
///   56      8      number of recorded samples S (uint64)
///   64      16*dim amplitudes, (re, im) float64 pairs
///   ...     8*S    recorded expectation values for grid indices 0..S-1
struct Checkpoint {
    static constexpr char magic[9] = "SBCKPT01";
    static constexpr std::uint32_t version = 1;

    std::int32_t sector = 0;
    double time = 0.0;
    std::uint64_t grid_index = 0;
    std::uint64_t seed = 0;
    std::uint64_t plan_hash = 0;
    StateVector amplitudes;
    std::vector<double> samples;
};

namespace detail {

template <class T>
void put(std::ostream& os, T const& v)
{
    os.write(reinterpret_cast<char const*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is)
{
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) { throw Error("checkpoint: truncated file"); }
    return v;
}

} // namespace detail

/// Writes atomically: temp file, then rename.
inline void write_checkpoint(std::filesystem::path const& path, Checkpoint const& ck)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) { throw Error("checkpoint: cannot open " + tmp.string()); }
        os.write(Checkpoint::magic, 8);
        detail::put(os, Checkpoint::version);
        detail::put(os, ck.sector);
        detail::put(os, ck.time);
        detail::put(os, ck.grid_index);
        detail::put(os, ck.seed);
        detail::put(os, ck.plan_hash);
        detail::put(os, static_cast<std::uint64_t>(ck.amplitudes.size()));
        detail::put(os, static_cast<std::uint64_t>(ck.samples.size()));
        for (auto const& a : ck.amplitudes) {
            detail::put(os, a.real());
            detail::put(os, a.imag());
        }
        for (double s : ck.samples) { detail::put(os, s); }
        if (!os) { throw Error("checkpoint: write failed for " + tmp.string()); }
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint read_checkpoint(std::filesystem::path const& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) { throw Error("checkpoint: cannot open " + path.string()); }
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, Checkpoint::magic, 8) != 0) {
        throw Error("checkpoint: bad magic in " + path.string());
    }
    if (detail::get<std::uint32_t>(is) != Checkpoint::version) {
        throw Error("checkpoint: unsupported version in " + path.string());
    }
    Checkpoint ck;
    ck.sector = detail::get<std::int32_t>(is);
    ck.time = detail::get<double>(is);
    ck.grid_index = detail::get<std::uint64_t>(is);
    ck.seed = detail::get<std::uint64_t>(is);
    ck.plan_hash = detail::get<std::uint64_t>(is);
    auto const dim = detail::get<std::uint64_t>(is);
    auto const ns = detail::get<std::uint64_t>(is);
    ck.amplitudes.resize(dim);
    for (auto& a : ck.amplitudes) {
        double const re = detail::get<double>(is);
        double const im = detail::get<double>(is);
        a = complex(re, im);
    }
    ck.samples.resize(ns);
    for (auto& s : ck.samples) { s = detail::get<double>(is); }
    return ck;
}

} // namespace spinbath
