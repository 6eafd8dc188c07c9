#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace frb {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(kM0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(kM1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

/// Uniform in (0, 1) on the midpoints of a 2^-52 lattice.
inline double philox_open_uniform(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t(hi) << 32) | lo) >> 12;
    return (double(bits) + 0.5) * 0x1.0p-52;
}

/// Complex standard normal (E|z|^2 = 1) drawn from one Philox block by Box-Muller.
inline std::complex<double> philox_complex_normal(const PhiloxCounter& ctr, const PhiloxKey& key) {
    const auto r = philox4x32(ctr, key);
    const double u1 = philox_open_uniform(r[0], r[1]);
    const double u2 = philox_open_uniform(r[2], r[3]);
    const double rad = std::sqrt(-std::log(u1));  // sqrt(-2 log u1) / sqrt(2)
    const double ang = 2.0 * std::numbers::pi * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
}

}  // namespace frb
