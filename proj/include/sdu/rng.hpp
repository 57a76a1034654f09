#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace sdu {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Stateless:
// every draw is a pure function of (key, counter).
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    explicit constexpr Philox4x32(std::uint64_t seed) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    constexpr Block operator()(Block ctr) const noexcept {
        std::array<std::uint32_t, 2> key = key_;
        for (int round = 0; round < 10; ++round) {
            ctr = single_round(ctr, key);
            key[0] += kW0;
            key[1] += kW1;
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    static constexpr Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) noexcept {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
    }

    std::array<std::uint32_t, 2> key_;
};

// Fixed stream identifiers; inner nested streams are derived with inner_stream().
namespace streams {
inline constexpr std::uint64_t outer = 0;
inline constexpr std::uint64_t constants = 1;
inline constexpr std::uint64_t validation = 2;
} // namespace streams

// splitmix64 finaliser, used to derive well-separated stream ids.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t inner_stream(std::uint64_t kind, std::uint64_t salt, std::uint64_t outer_index) noexcept {
    return mix64(mix64(mix64(kind + 0x100) ^ salt) ^ outer_index) | (1ull << 63);
}

// Standard normal for (seed, stream, path, step). Two 53-bit uniforms from
// one Philox block, Box-Muller cosine branch.
class NormalSource {
public:
    constexpr NormalSource(std::uint64_t seed, std::uint64_t stream) noexcept
        : gen_(seed), stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    double operator()(std::uint64_t path, std::uint64_t step) const noexcept {
        const auto b = gen_({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(path), stream_lo_,
                             stream_hi_});
        const double u1 = to_unit_open(b[0], b[1]);
        const double u2 = to_unit_open(b[2], b[3]);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925 * u2);
    }

    // Uniform on (0, 1) from the same block layout; used by tests and the oracle.
    double uniform(std::uint64_t path, std::uint64_t step) const noexcept {
        const auto b = gen_({static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(path), stream_lo_,
                             stream_hi_});
        return to_unit_open(b[0], b[1]);
    }

private:
    static double to_unit_open(std::uint32_t hi, std::uint32_t lo) noexcept {
        const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
        return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    }

    Philox4x32 gen_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
};

} // namespace sdu
