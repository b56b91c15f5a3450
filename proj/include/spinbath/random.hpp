#pragma once

#include <cstdint>
#include <random>

namespace spinbath {

/// SplitMix64 finaliser; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Generator for the sub-stream `stream` of the master seed `seed`.
///
/// Every random draw in the library goes through a named stream, so the
/// values a sector or sweep point sees never depend on scheduling order.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(mix64(seed)),
                      static_cast<std::uint32_t>(mix64(seed) >> 32),
                      static_cast<std::uint32_t>(mix64(stream ^ 0x5851f42d4c957f2dULL)),
                      static_cast<std::uint32_t>(mix64(stream ^ 0x5851f42d4c957f2dULL) >> 32)};
    return std::mt19937_64(seq);
}

// Stream tags, kept distinct so different consumers never share draws.
namespace stream_tag {
inline constexpr std::uint64_t couplings = 0x1000;
inline constexpr std::uint64_t haar = 0x2000;
inline constexpr std::uint64_t lanczos = 0x3000;
inline constexpr std::uint64_t trace_estimate = 0x4000;
} // namespace stream_tag

} // namespace spinbath
