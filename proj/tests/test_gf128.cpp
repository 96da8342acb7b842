#include "doctest.h"

#include "skyveil/gf128.hpp"
#include "skyveil/rng.hpp"

using namespace skyveil;

namespace {

// Independent reference: schoolbook double-and-add, reducing one degree at a
// time. Deliberately a different algorithm from both production paths.
GF128 xtime(GF128 a) {
    uint64_t carry = a.hi >> 63;
    a.hi = (a.hi << 1) | (a.lo >> 63);
    a.lo <<= 1;
    if (carry) a.lo ^= 0x87;  // x^128 = x^7 + x^2 + x + 1
    return a;
}

GF128 slow_mul(GF128 a, GF128 b) {
    GF128 acc{};
    GF128 cur = a;
    for (int i = 0; i < 128; i++) {
        uint64_t bit = (i < 64) ? (b.lo >> i) & 1 : (b.hi >> (i - 64)) & 1;
        if (bit) acc ^= cur;
        cur = xtime(cur);
    }
    return acc;
}

}  // namespace

TEST_CASE("field constants") {
    GF128 x64{0, 1};  // x^64
    CHECK(gf_mul(x64, x64) == GF128{0x87, 0});
    GF128 x127{0, 0x8000000000000000ull};
    GF128 x{2, 0};
    CHECK(gf_mul(x127, x) == GF128{0x87, 0});
    GF128 a{0x0123456789abcdefull, 0xfedcba9876543210ull};
    CHECK(gf_mul(a, GF128::one()) == a);
    CHECK(gf_mul(GF128::one(), a) == a);
    CHECK(gf_mul(a, GF128::zero()) == GF128::zero());
}

TEST_CASE("matches schoolbook reference") {
    Rng rng = Rng::seeded(21);
    for (int i = 0; i < 3000; i++) {
        GF128 a = GF128::random(rng);
        GF128 b = GF128::random(rng);
        GF128 want = slow_mul(a, b);
        CHECK(gf_mul(a, b) == want);
        CHECK(gf_mul_portable(a, b) == want);
    }
}

TEST_CASE("portable and accelerated paths agree") {
    if (!gf_has_clmul()) return;
    Rng rng = Rng::seeded(22);
    for (int i = 0; i < 5000; i++) {
        GF128 a = GF128::random(rng);
        GF128 b = GF128::random(rng);
        CHECK(gf_mul(a, b) == gf_mul_portable(a, b));
    }
}

TEST_CASE("ring axioms") {
    Rng rng = Rng::seeded(23);
    for (int i = 0; i < 500; i++) {
        GF128 a = GF128::random(rng);
        GF128 b = GF128::random(rng);
        GF128 c = GF128::random(rng);
        CHECK(gf_mul(a, b) == gf_mul(b, a));
        CHECK(gf_mul(gf_mul(a, b), c) == gf_mul(a, gf_mul(b, c)));
        CHECK(gf_mul(a, b ^ c) == (gf_mul(a, b) ^ gf_mul(a, c)));
    }
}

TEST_CASE("masking and serialization") {
    Rng rng = Rng::seeded(24);
    GF128 a = GF128::random(rng);
    CHECK(a.masked(0) == GF128::zero());
    CHECK(a.masked(1) == a);
    auto bytes = a.to_bytes();
    CHECK(GF128::from_bytes(bytes) == a);
    // little-endian: byte 0 is the low byte of lo
    GF128 v{0x0807060504030201ull, 0x100f0e0d0c0b0a09ull};
    auto vb = v.to_bytes();
    for (int i = 0; i < 16; i++) CHECK(vb[i] == i + 1);
}
