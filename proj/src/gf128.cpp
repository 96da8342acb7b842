#include "skyveil/gf128.hpp"

#include <cstring>

#if defined(__x86_64__)
#include <immintrin.h>
#include <wmmintrin.h>
#define SKYVEIL_X86 1
#endif

namespace skyveil {

using u128 = unsigned __int128;

GF128 GF128::random(Rng& rng) {
    uint8_t b[16];
    rng.fill(b);
    return from_bytes(std::span<const uint8_t>(b, 16));
}

GF128 GF128::from_bytes(std::span<const uint8_t> b) {
    GF128 v;
    for (int i = 0; i < 8; i++) v.lo |= uint64_t(b[i]) << (8 * i);
    for (int i = 0; i < 8; i++) v.hi |= uint64_t(b[8 + i]) << (8 * i);
    return v;
}

std::array<uint8_t, 16> GF128::to_bytes() const {
    std::array<uint8_t, 16> b;
    for (int i = 0; i < 8; i++) b[i] = uint8_t(lo >> (8 * i));
    for (int i = 0; i < 8; i++) b[8 + i] = uint8_t(hi >> (8 * i));
    return b;
}

std::string GF128::hex() const {
    static const char* d = "0123456789abcdef";
    auto b = to_bytes();
    std::string s;
    s.reserve(32);
    for (int i = 15; i >= 0; i--) {
        s.push_back(d[b[i] >> 4]);
        s.push_back(d[b[i] & 15]);
    }
    return s;
}

namespace {

// 64x64 -> 128 carry-less multiply, 4-bit window.
u128 clmul64(uint64_t a, uint64_t b) {
    u128 tbl[16];
    tbl[0] = 0;
    tbl[1] = u128(b);
    for (int w = 2; w < 16; w += 2) {
        tbl[w] = tbl[w >> 1] << 1;
        tbl[w + 1] = tbl[w] ^ u128(b);
    }
    u128 acc = 0;
    for (int i = 0; i < 16; i++) {
        acc ^= tbl[(a >> (4 * i)) & 15] << (4 * i);
    }
    return acc;
}

// reduce a 256-bit product (hi:lo) mod x^128 + x^7 + x^2 + x + 1
GF128 reduce256(u128 lo, u128 hi) {
    // hi * x^128 == hi * (x^7 + x^2 + x + 1)
    // fold twice; the second fold input has degree < 8 so it cannot overflow again
    u128 t_lo = lo ^ (hi << 7) ^ (hi << 2) ^ (hi << 1) ^ hi;
    u128 t_hi = (hi >> 121) ^ (hi >> 126) ^ (hi >> 127);
    t_lo ^= (t_hi << 7) ^ (t_hi << 2) ^ (t_hi << 1) ^ t_hi;
    return {uint64_t(t_lo), uint64_t(t_lo >> 64)};
}

#if SKYVEIL_X86
__attribute__((target("pclmul,sse4.1"))) GF128 gf_mul_clmul(GF128 a, GF128 b) {
    __m128i x = _mm_set_epi64x(int64_t(a.hi), int64_t(a.lo));
    __m128i y = _mm_set_epi64x(int64_t(b.hi), int64_t(b.lo));
    __m128i t0 = _mm_clmulepi64_si128(x, y, 0x00);  // a.lo * b.lo
    __m128i t1 = _mm_clmulepi64_si128(x, y, 0x10);  // a.hi * b.lo
    __m128i t2 = _mm_clmulepi64_si128(x, y, 0x01);  // a.lo * b.hi
    __m128i t3 = _mm_clmulepi64_si128(x, y, 0x11);  // a.hi * b.hi
    __m128i mid = _mm_xor_si128(t1, t2);
    uint64_t p0 = uint64_t(_mm_extract_epi64(t0, 0));
    uint64_t p1 = uint64_t(_mm_extract_epi64(t0, 1)) ^ uint64_t(_mm_extract_epi64(mid, 0));
    uint64_t p2 = uint64_t(_mm_extract_epi64(t3, 0)) ^ uint64_t(_mm_extract_epi64(mid, 1));
    uint64_t p3 = uint64_t(_mm_extract_epi64(t3, 1));
    u128 lo = (u128(p1) << 64) | p0;
    u128 hi = (u128(p3) << 64) | p2;
    return reduce256(lo, hi);
}
#endif

}  // namespace

GF128 gf_mul_portable(GF128 a, GF128 b) {
    u128 p0 = clmul64(a.lo, b.lo);
    u128 p1 = clmul64(a.lo, b.hi) ^ clmul64(a.hi, b.lo);
    u128 p2 = clmul64(a.hi, b.hi);
    u128 lo = p0 ^ (p1 << 64);
    u128 hi = p2 ^ (p1 >> 64);
    return reduce256(lo, hi);
}

bool gf_has_clmul() {
#if SKYVEIL_X86
    return __builtin_cpu_supports("pclmul");
#else
    return false;
#endif
}

GF128 gf_mul(GF128 a, GF128 b) {
#if SKYVEIL_X86
    static const bool fast = gf_has_clmul();
    if (fast) return gf_mul_clmul(a, b);
#endif
    return gf_mul_portable(a, b);
}

}  // namespace skyveil
