#include "doctest.h"

#include <cstdio>

#include "skyveil/bristol.hpp"
#include "skyveil/circuit.hpp"
#include "skyveil/errors.hpp"
#include "skyveil/fixedpoint.hpp"
#include "skyveil/rng.hpp"

using namespace skyveil;

namespace {

int64_t signed_from_bits(std::span<const uint8_t> bits) {
    u128 v = u128_from_bits(bits);
    if (bits.size() < 128 && bits.back())
        v |= ~u128{0} << bits.size();
    return static_cast<int64_t>(v);
}

std::vector<uint8_t> concat_bits(std::initializer_list<std::pair<u128, int>> parts) {
    std::vector<uint8_t> out;
    for (const auto& [v, w] : parts) {
        auto b = bits_from_u128(v, w);
        out.insert(out.end(), b.begin(), b.end());
    }
    return out;
}

// Runs the engine schedule (prologue, then per layer: AND gates first,
// linear gates second) and checks every gate only reads wires that were
// already written. Returns the outputs.
std::vector<uint8_t> eval_layered(const Circuit& c, std::span<const uint8_t> inputs) {
    auto cc = CompiledCircuit::compile(c);
    std::vector<uint8_t> w(c.n_wires, 0), ready(c.n_wires, 0);
    w[1] = 1;
    ready[0] = ready[1] = 1;
    REQUIRE(inputs.size() == c.input_bits());
    for (size_t i = 0; i < inputs.size(); i++) {
        w[2 + i] = inputs[i];
        ready[2 + i] = 1;
    }
    auto run = [&](uint32_t gi) {
        const Gate& g = c.gates[gi];
        REQUIRE(ready[g.in0]);
        if (g.kind != GateKind::Not) REQUIRE(ready[g.in1]);
        REQUIRE(!ready[g.out]);
        switch (g.kind) {
            case GateKind::Xor: w[g.out] = w[g.in0] ^ w[g.in1]; break;
            case GateKind::And: w[g.out] = w[g.in0] & w[g.in1]; break;
            case GateKind::Not: w[g.out] = w[g.in0] ^ 1; break;
        }
        ready[g.out] = 1;
    };
    for (uint32_t gi : cc.prologue) run(gi);
    for (const auto& layer : cc.layers) {
        for (uint32_t gi : layer.ands) run(gi);
        for (uint32_t gi : layer.linear) run(gi);
    }
    std::vector<uint8_t> out;
    for (const auto& grp : c.outputs)
        for (uint32_t i = 0; i < grp.count; i++) out.push_back(w[grp.first + i]);
    return out;
}

}  // namespace

TEST_CASE("adder exhaustive small widths") {
    for (int k = 1; k <= 6; k++) {
        Circuit c = build_adder(k);
        Circuit oc = optimize(c);
        for (int64_t a = -(1 << (k - 1)); a < (1 << (k - 1)); a++) {
            for (int64_t b = -(1 << (k - 1)); b < (1 << (k - 1)); b++) {
                auto in = concat_bits({{static_cast<u128>(a), k}, {static_cast<u128>(b), k}});
                auto out = evaluate(c, in);
                REQUIRE(out.size() == static_cast<size_t>(k + 1));
                REQUIRE(signed_from_bits(out) == a + b);
                REQUIRE(signed_from_bits(evaluate(oc, in)) == a + b);
            }
        }
    }
}

TEST_CASE("subtractor exhaustive small widths") {
    for (int k = 1; k <= 6; k++) {
        Circuit c = build_subtractor(k);
        for (int64_t a = -(1 << (k - 1)); a < (1 << (k - 1)); a++)
            for (int64_t b = -(1 << (k - 1)); b < (1 << (k - 1)); b++) {
                auto in = concat_bits({{static_cast<u128>(a), k}, {static_cast<u128>(b), k}});
                REQUIRE(signed_from_bits(evaluate(c, in)) == a - b);
            }
    }
}

TEST_CASE("subtractor spec example 3 minus 5") {
    Circuit c = build_subtractor(4);
    auto out = evaluate(c, concat_bits({{3, 4}, {5, 4}}));
    REQUIRE(out.size() == 5);
    CHECK(signed_from_bits(out) == -2);
    CHECK(u128_from_bits(out) == 0b11110);
}

TEST_CASE("comparator exhaustive small widths") {
    for (int k = 1; k <= 6; k++) {
        Circuit c = build_comparator_geq(k);
        for (int64_t a = -(1 << (k - 1)); a < (1 << (k - 1)); a++)
            for (int64_t b = -(1 << (k - 1)); b < (1 << (k - 1)); b++) {
                auto in = concat_bits({{static_cast<u128>(a), k}, {static_cast<u128>(b), k}});
                auto out = evaluate(c, in);
                REQUIRE(out.size() == 1);
                REQUIRE(out[0] == (a >= b ? 1 : 0));
            }
    }
}

TEST_CASE("comparator optimized AND count is k") {
    for (int k : {4, 8, 16, 32}) {
        auto s = optimize(build_comparator_geq(k)).stats();
        CHECK(s.and_count == static_cast<uint64_t>(k));
        CHECK(s.not_count == 0);
    }
}

TEST_CASE("multiplier exhaustive 4-bit unsigned") {
    Circuit c = build_multiplier(4);
    Circuit oc = optimize(c);
    for (uint64_t a = 0; a < 16; a++)
        for (uint64_t b = 0; b < 16; b++) {
            auto in = concat_bits({{a, 4}, {b, 4}});
            auto out = evaluate(c, in);
            REQUIRE(out.size() == 8);
            REQUIRE(u128_from_bits(out) == a * b);
            REQUIRE(u128_from_bits(evaluate(oc, in)) == a * b);
        }
}

TEST_CASE("multiplier random 16-bit") {
    Circuit c = build_multiplier(16);
    Rng rng = Rng::seeded(31);
    for (int i = 0; i < 1500; i++) {
        uint64_t a = rng.u64() & 0xFFFF, b = rng.u64() & 0xFFFF;
        auto out = evaluate(c, concat_bits({{a, 16}, {b, 16}}));
        REQUIRE(u128_from_bits(out) == a * b);
    }
}

TEST_CASE("isqrt exhaustive 8-bit") {
    Circuit c = build_isqrt(8);
    for (uint64_t n = 0; n < 256; n++) {
        auto out = evaluate(c, bits_from_u128(n, 8));
        REQUIRE(out.size() == 4);
        REQUIRE(u128_from_bits(out) == isqrt_u64(n));
    }
}

TEST_CASE("isqrt wider widths vs oracle") {
    for (int k : {12, 16, 20}) {
        Circuit c = build_isqrt(k);
        Rng rng = Rng::seeded(32 + k);
        for (int i = 0; i < 400; i++) {
            uint64_t n = rng.u64() & ((1ull << k) - 1);
            auto out = evaluate(c, bits_from_u128(n, k));
            REQUIRE(u128_from_bits(out) == isqrt_u64(n));
        }
        // perfect squares and off-by-one boundaries
        for (uint64_t r = 0; r < (1ull << (k / 2)); r += 7) {
            uint64_t n = r * r;
            REQUIRE(u128_from_bits(evaluate(c, bits_from_u128(n, k))) == r);
            if (n > 0)
                REQUIRE(u128_from_bits(evaluate(c, bits_from_u128(n - 1, k))) == r - 1);
        }
    }
}

TEST_CASE("divider exhaustive 6 by 6 bits") {
    Circuit c = build_divider(6, 6);
    for (uint64_t n = 0; n < 64; n++)
        for (uint64_t d = 0; d < 64; d++) {
            auto out = evaluate(c, concat_bits({{n, 6}, {d, 6}}));
            REQUIRE(out.size() == 6);
            uint64_t want = d == 0 ? 0 : n / d;  // divide-by-zero yields zero
            REQUIRE(u128_from_bits(out) == want);
        }
}

TEST_CASE("bounded divider exhaustive") {
    Builder b;
    auto num = b.add_input("n", InputRole::Party0, 6);
    auto den = b.add_input("d", InputRole::Party1, 3);
    b.add_output("q", b.divide_bounded(num, den, 3));
    Circuit c = b.finish();
    for (uint64_t n = 0; n < 64; n++)
        for (uint64_t d = 0; d < 8; d++) {
            if (d != 0 && n >= d * 8) continue;  // caller contract
            auto out = evaluate(c, concat_bits({{n, 6}, {d, 3}}));
            REQUIRE(out.size() == 3);
            uint64_t want = d == 0 ? 0 : n / d;
            REQUIRE(u128_from_bits(out) == want);
        }
}

namespace {

std::vector<uint8_t> trajectory_inputs(const Vec3& sat, const Vec3& air, FpParams p) {
    return concat_bits({{sat.x.raw(), p.k},
                        {sat.y.raw(), p.k},
                        {sat.z.raw(), p.k},
                        {air.x.raw(), p.k},
                        {air.y.raw(), p.k},
                        {air.z.raw(), p.k}});
}

void check_trajectory_matches(const Circuit& c, FpParams p, Rng& rng, int reps) {
    for (int i = 0; i < reps; i++) {
        auto coord = [&]() { return FixedPoint::from_raw(rng.u64() & p.mask(), p); };
        Vec3 sat{coord(), coord(), coord()};
        Vec3 air{coord(), coord(), coord()};
        auto out = evaluate(c, trajectory_inputs(sat, air, p));
        REQUIRE(out.size() == static_cast<size_t>(3 * p.k));
        std::span<const uint8_t> sp(out);
        u128 gx = u128_from_bits(sp.subspan(0, p.k));
        u128 gy = u128_from_bits(sp.subspan(p.k, p.k));
        u128 gz = u128_from_bits(sp.subspan(2 * p.k, p.k));
        bool degenerate = sat.x.raw() == air.x.raw() && sat.y.raw() == air.y.raw() &&
                          sat.z.raw() == air.z.raw();
        if (degenerate) {
            REQUIRE(gx == 0);
            REQUIRE(gy == 0);
            REQUIRE(gz == 0);
        } else {
            Vec3 want = trajectory_plain(sat, air);
            REQUIRE(gx == want.x.raw());
            REQUIRE(gy == want.y.raw());
            REQUIRE(gz == want.z.raw());
        }
    }
}

}  // namespace

TEST_CASE("trajectory circuit matches oracle k=8") {
    FpParams p(8, 3);
    Circuit c = build_trajectory(p);
    Rng rng = Rng::seeded(41);
    check_trajectory_matches(c, p, rng, 1500);
}

TEST_CASE("trajectory circuit matches oracle k=16 full fraction") {
    FpParams p(16, 13);
    Circuit c = build_trajectory(p);
    Rng rng = Rng::seeded(42);
    check_trajectory_matches(c, p, rng, 300);
    Circuit oc = optimize(c);
    Rng rng2 = Rng::seeded(42);
    check_trajectory_matches(oc, p, rng2, 300);
}

TEST_CASE("trajectory degenerate input gives all-zero output") {
    FpParams p(8, 3);
    Circuit c = build_trajectory(p);
    Rng rng = Rng::seeded(43);
    for (int i = 0; i < 50; i++) {
        auto coord = [&]() { return FixedPoint::from_raw(rng.u64() & p.mask(), p); };
        Vec3 sat{coord(), coord(), coord()};
        auto out = evaluate(c, trajectory_inputs(sat, sat, p));
        for (uint8_t bit : out) REQUIRE(bit == 0);
    }
}

TEST_CASE("trajectory spec example through the circuit") {
    FpParams p(32, 16);
    Circuit c = optimize(build_trajectory(p));
    Vec3 sat{FixedPoint::encode(0.0, p), FixedPoint::encode(0.0, p), FixedPoint::encode(0.0, p)};
    Vec3 air{FixedPoint::encode(3.0, p), FixedPoint::encode(4.0, p), FixedPoint::encode(0.0, p)};
    auto out = evaluate(c, trajectory_inputs(sat, air, p));
    std::span<const uint8_t> sp(out);
    CHECK(u128_from_bits(sp.subspan(0, p.k)) == 39321);
    CHECK(u128_from_bits(sp.subspan(p.k, p.k)) == 52428);
    CHECK(u128_from_bits(sp.subspan(2 * p.k, p.k)) == 0);
}

TEST_CASE("range check matches oracle") {
    FpParams p(8, 3);
    Circuit c = build_range_check(p);
    Circuit oc = optimize(c);
    Rng rng = Rng::seeded(51);
    auto fp = [&](uint64_t raw) { return FixedPoint::from_raw(raw & p.mask(), p); };
    for (int i = 0; i < 4000; i++) {
        // random bounds with each min <= max (signed), random location
        std::vector<FixedPoint> bmin, bmax;
        for (int a = 0; a < 3; a++) {
            FixedPoint x = fp(rng.u64()), y = fp(rng.u64());
            if (x.signed_raw() > y.signed_raw()) std::swap(x, y);
            bmin.push_back(x);
            bmax.push_back(y);
        }
        Vec3 loc{fp(rng.u64()), fp(rng.u64()), fp(rng.u64())};
        Bounds bounds{bmin[0], bmax[0], bmin[1], bmax[1], bmin[2], bmax[2]};
        bool want = in_bounds_plain(loc, bounds);
        auto in = concat_bits({{loc.x.raw(), p.k},
                               {loc.y.raw(), p.k},
                               {loc.z.raw(), p.k},
                               {bmin[0].raw(), p.k},
                               {bmax[0].raw(), p.k},
                               {bmin[1].raw(), p.k},
                               {bmax[1].raw(), p.k},
                               {bmin[2].raw(), p.k},
                               {bmax[2].raw(), p.k}});
        REQUIRE(evaluate(c, in)[0] == (want ? 1 : 0));
        REQUIRE(evaluate(oc, in)[0] == (want ? 1 : 0));
    }
}

TEST_CASE("range check boundary inclusivity") {
    FpParams p(16, 4);
    Circuit c = build_range_check(p);
    auto enc = [&](double v) { return FixedPoint::encode(v, p); };
    auto run = [&](double x, double y, double z) {
        auto in = concat_bits({{enc(x).raw(), p.k},
                               {enc(y).raw(), p.k},
                               {enc(z).raw(), p.k},
                               {enc(-1.0).raw(), p.k},
                               {enc(1.0).raw(), p.k},
                               {enc(-2.0).raw(), p.k},
                               {enc(2.0).raw(), p.k},
                               {enc(0.0).raw(), p.k},
                               {enc(5.0).raw(), p.k}});
        return evaluate(c, in)[0];
    };
    CHECK(run(-1.0, -2.0, 0.0) == 1);
    CHECK(run(1.0, 2.0, 5.0) == 1);
    CHECK(run(-1.0625, 0, 1) == 0);
    CHECK(run(0, 2.0625, 1) == 0);
}

TEST_CASE("range check optimized AND count is 6k+5") {
    for (int k : {8, 16, 32, 64}) {
        FpParams p(k, 3);
        auto s = optimize(build_range_check(p)).stats();
        CHECK(s.and_count == static_cast<uint64_t>(6 * k + 5));
        CHECK(s.not_count == 0);
    }
}

TEST_CASE("optimizer never increases AND count and kills NOT gates") {
    FpParams p8(8, 3);
    FpParams p16(16, 8);
    Circuit cs[] = {build_adder(6),       build_subtractor(6),    build_comparator_geq(8),
                    build_multiplier(8),  build_isqrt(10),        build_divider(8, 8),
                    build_trajectory(p8), build_range_check(p16)};
    for (const Circuit& c : cs) {
        auto before = c.stats();
        Circuit oc = optimize(c);
        auto after = oc.stats();
        CHECK(after.and_count <= before.and_count);
        CHECK(after.not_count == 0);
        CHECK(oc.input_bits() == c.input_bits());
        CHECK(oc.output_bits() == c.output_bits());
    }
}

TEST_CASE("optimizer folds constants and duplicate structure") {
    Builder b;
    auto a = b.add_input("a", InputRole::Party0, 2);
    // x ^ x, AND with constants, duplicated AND in both operand orders
    uint32_t xx = b.gxor(a[0], a[0]);
    uint32_t and1 = b.gand(a[0], a[1]);
    uint32_t and2 = b.gand(a[1], a[0]);
    uint32_t dup = b.gxor(and1, and2);  // always zero
    uint32_t with_const = b.gand(a[0], Builder::kOne);
    uint32_t nn = b.gnot(b.gnot(a[1]));
    b.add_output("z", {xx, dup, with_const, nn});
    Circuit c = b.finish();
    Circuit oc = optimize(c);
    auto s = oc.stats();
    CHECK(s.and_count == 0);
    CHECK(s.not_count == 0);
    for (uint64_t v = 0; v < 4; v++) {
        auto out = evaluate(oc, bits_from_u128(v, 2));
        CHECK(out[0] == 0);
        CHECK(out[1] == 0);
        CHECK(out[2] == ((v >> 0) & 1));
        CHECK(out[3] == ((v >> 1) & 1));
    }
}

TEST_CASE("optimizer differential on trajectory 10^4 inputs") {
    FpParams p(16, 8);
    Circuit c = build_trajectory(p);
    Circuit oc = optimize(c);
    Rng rng = Rng::seeded(61);
    for (int i = 0; i < 10000; i++) {
        auto coord = [&]() { return FixedPoint::from_raw(rng.u64() & p.mask(), p); };
        Vec3 sat{coord(), coord(), coord()};
        Vec3 air{coord(), coord(), coord()};
        auto in = trajectory_inputs(sat, air, p);
        REQUIRE(evaluate(c, in) == evaluate(oc, in));
    }
}

TEST_CASE("evaluate rejects wrong arity") {
    Circuit c = build_adder(4);
    std::vector<uint8_t> in(7, 0);
    CHECK_THROWS_AS(evaluate(c, in), std::invalid_argument);
}

TEST_CASE("bristol round trip is gate-for-gate identical") {
    FpParams p(8, 3);
    for (Circuit c : {optimize(build_range_check(p)), optimize(build_trajectory(p)),
                      build_adder(4)}) {
        std::string text = to_bristol(c);
        Circuit back = from_bristol(text);
        REQUIRE(back.gates.size() == c.gates.size());
        REQUIRE(back.n_wires == c.n_wires);
        for (size_t i = 0; i < c.gates.size(); i++) {
            CHECK(back.gates[i].kind == c.gates[i].kind);
            CHECK(back.gates[i].in0 == c.gates[i].in0);
            CHECK(back.gates[i].in1 == c.gates[i].in1);
            CHECK(back.gates[i].out == c.gates[i].out);
        }
        CHECK(to_bristol(back) == text);
    }
}

TEST_CASE("bristol parses a hand-written file") {
    // wires: 0,1 constants; 2,3 inputs; gates write 4 = 2^3 (unused),
    // 5 = 2&3, 6 = ~5; the two single-bit outputs are the trailing wires 5,6
    std::string text =
        "3 7\n"
        "2 1 1\n"
        "2 1 1\n"
        "2 1 2 3 4 XOR\n"
        "2 1 2 3 5 AND\n"
        "1 1 5 6 INV\n";
    Circuit c = from_bristol(text);
    CHECK(c.gates.size() == 3);
    CHECK(c.inputs.size() == 2);
    CHECK(c.outputs.size() == 2);
    // 1 & 1 = 1, ~1 = 0
    auto out = evaluate(c, std::vector<uint8_t>{1, 1});
    CHECK(out[0] == 1);
    CHECK(out[1] == 0);
}

TEST_CASE("bristol rejects malformed input") {
    CHECK_THROWS_AS(from_bristol(""), ParseError);
    CHECK_THROWS_AS(from_bristol("1\n"), ParseError);
    // gate reads wire 9 that is never written
    std::string bad =
        "1 5\n"
        "2 1 1\n"
        "1 1\n"
        "2 1 9 2 4 AND\n";
    try {
        from_bristol(bad);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line == 4);
    }
    // unknown opcode
    CHECK_THROWS_AS(from_bristol("1 5\n2 1 1\n1 1\n2 1 2 3 4 NAND\n"), ParseError);
    // trailing garbage
    CHECK_THROWS_AS(from_bristol("1 5\n2 1 1\n1 1\n2 1 2 3 4 XOR\nextra\n"), ParseError);
}

TEST_CASE("layered schedule is sound and equivalent") {
    FpParams p(8, 3);
    Rng rng = Rng::seeded(71);
    for (Circuit c : {optimize(build_trajectory(p)), optimize(build_range_check(p)),
                      build_multiplier(6)}) {
        for (int i = 0; i < 20; i++) {
            std::vector<uint8_t> in(c.input_bits());
            for (auto& bit : in) bit = rng.bit();
            REQUIRE(eval_layered(c, in) == evaluate(c, in));
        }
    }
}

TEST_CASE("layer count tracks AND depth") {
    FpParams p(16, 8);
    Circuit c = optimize(build_trajectory(p));
    auto cc = CompiledCircuit::compile(c);
    CHECK(cc.layers.size() == c.stats().depth);
    CHECK(cc.and_count == c.stats().and_count);
    uint64_t n_ands = 0;
    for (const auto& l : cc.layers) {
        CHECK(!l.ands.empty());  // every layer earns its round trip
        n_ands += l.ands.size();
    }
    CHECK(n_ands == cc.and_count);
}

TEST_CASE("trajectory gate counts grow superlinearly and are pinned") {
    // Regression pins: any builder/optimizer change that shifts these is
    // worth a deliberate review, not an accident.
    struct Pin {
        int k;
        uint64_t ands, depth;
    };
    const Pin pins[] = {{8, 940, 154}, {16, 3423, 502}, {32, 10918, 1450}};
    uint64_t prev = 0;
    for (const Pin& pin : pins) {
        FpParams p(pin.k, std::min(20, pin.k - 3));
        auto s = optimize(build_trajectory(p)).stats();
        CHECK(s.and_count == pin.ands);
        CHECK(s.depth == pin.depth);
        CHECK(s.and_count > 2 * prev);  // superlinear growth
        prev = s.and_count;
    }
}
