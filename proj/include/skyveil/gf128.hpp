#ifndef SKYVEIL_GF128_HPP
#define SKYVEIL_GF128_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>

#include "skyveil/rng.hpp"

namespace skyveil {

// GF(2^128) with reduction polynomial x^128 + x^7 + x^2 + x + 1.
// Bit i of the 128-bit value is the coefficient of x^i; serialization is
// 16 bytes little-endian. Addition is XOR.
struct GF128 {
    uint64_t lo = 0;
    uint64_t hi = 0;

    constexpr GF128() = default;
    constexpr GF128(uint64_t lo_, uint64_t hi_) : lo(lo_), hi(hi_) {}

    static GF128 zero() { return {}; }
    static GF128 one() { return {1, 0}; }
    static GF128 random(Rng& rng);
    static GF128 from_bytes(std::span<const uint8_t> b);  // b.size() == 16

    std::array<uint8_t, 16> to_bytes() const;
    std::string hex() const;

    bool is_zero() const { return lo == 0 && hi == 0; }

    friend GF128 operator^(GF128 a, GF128 b) { return {a.lo ^ b.lo, a.hi ^ b.hi}; }
    GF128& operator^=(GF128 b) {
        lo ^= b.lo;
        hi ^= b.hi;
        return *this;
    }
    friend bool operator==(GF128 a, GF128 b) { return a.lo == b.lo && a.hi == b.hi; }
    friend bool operator!=(GF128 a, GF128 b) { return !(a == b); }

    // Conditional select: bit ? *this : 0. The IT-MAC term x * Delta.
    GF128 masked(uint8_t bit) const {
        uint64_t m = uint64_t(0) - uint64_t(bit & 1);
        return {lo & m, hi & m};
    }
};

// Carry-less product reduced mod x^128 + x^7 + x^2 + x + 1.
GF128 gf_mul(GF128 a, GF128 b);

// Portable path, kept callable so tests can cross-check the PCLMUL path.
GF128 gf_mul_portable(GF128 a, GF128 b);

bool gf_has_clmul();

}  // namespace skyveil

#endif
