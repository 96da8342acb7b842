#include <doctest.h>

#include <cmath>
#include <thread>

#include "skyveil/channel.hpp"
#include "skyveil/circuit.hpp"
#include "skyveil/messages.hpp"
#include "skyveil/smpc.hpp"

using namespace skyveil;

namespace {

struct PartyOutcome {
    std::vector<uint8_t> out;
    std::exception_ptr err;
    uint64_t bytes_sent = 0;
    std::vector<uint8_t> opened;
    uint64_t triples = 0;
};

struct Harness {
    const Circuit& circ;
    EngineMode mode;
    int receiver = 0;
    uint64_t seed = 1;
    TamperChannel::Hook hook0{};  // tampers party 0's outgoing frames
    TamperChannel::Hook hook1{};

    std::pair<PartyOutcome, PartyOutcome> run(std::span<const uint8_t> in0,
                                              std::span<const uint8_t> in1) const {
        CompiledCircuit cc = CompiledCircuit::compile(circ);
        auto krng = Rng::seeded(seed ^ 0xde17a5);
        GF128 d0 = GF128::random(krng), d1 = GF128::random(krng);
        auto state = std::make_shared<DealerState>(Rng::seeded(seed ^ 0x5ca1e));
        state->set_delta(0, d0);
        state->set_delta(1, d1);
        auto [cA, cB] = make_mem_pair();
        std::unique_ptr<Channel> ch0 = std::move(cA), ch1 = std::move(cB);
        if (hook0) ch0 = std::make_unique<TamperChannel>(std::move(ch0), hook0);
        if (hook1) ch1 = std::make_unique<TamperChannel>(std::move(ch1), hook1);

        PartyOutcome o0, o1;
        auto party = [&](int p, std::unique_ptr<Channel>& ch, std::span<const uint8_t> in,
                         PartyOutcome& o, const GF128& dd) {
            try {
                LocalDealerSource src(state, p);
                Rng prng = Rng::seeded(seed * 31 + static_cast<uint64_t>(p) + 7);
                Engine eng(cc, mode, p, 42, *ch, src, prng, dd);
                eng.share_inputs(in);
                eng.evaluate();
                o.out = eng.reveal_to(receiver);
                o.opened = eng.opened_values();
                o.triples = eng.triples_used();
                o.bytes_sent = ch->bytes_sent();
            } catch (...) {
                o.err = std::current_exception();
                ch.reset();  // unblock the peer
            }
        };
        std::thread t1([&] { party(1, ch1, in1, o1, d1); });
        party(0, ch0, in0, o0, d0);
        t1.join();
        return {o0, o1};
    }
};

std::vector<uint8_t> fp_bits(const FixedPoint& v) {
    std::vector<uint8_t> out(static_cast<size_t>(v.params().k));
    for (size_t i = 0; i < out.size(); ++i) out[i] = v.bit(static_cast<int>(i));
    return out;
}

std::vector<uint8_t> vec3_bits(const Vec3& v) {
    std::vector<uint8_t> out;
    for (const FixedPoint& c : v.comps()) {
        auto b = fp_bits(c);
        out.insert(out.end(), b.begin(), b.end());
    }
    return out;
}

u128 bits_to_u128(std::span<const uint8_t> bits) {
    u128 v = 0;
    for (size_t i = 0; i < bits.size(); ++i)
        if (bits[i] & 1) v |= u128(1) << i;
    return v;
}

// Random location whose raw components fit in box_bits (plus a sign), so the
// trajectory intermediates stay well inside the fixed-point range.
Vec3 random_vec3(FpParams p, Rng& rng, int box_bits) {
    auto comp = [&] {
        mpz_class v(static_cast<unsigned long>(rng.below(1ull << box_bits)));
        if (rng.bit()) v = -v;
        return FixedPoint::from_signed(v, p);
    };
    FixedPoint x = comp(), y = comp(), z = comp();
    return Vec3{x, y, z};
}

}  // namespace

TEST_CASE("xor circuit reconstructs inputs in both modes") {
    Builder b;
    auto x = b.add_input("x", InputRole::Party0, 8);
    auto y = b.add_input("y", InputRole::Party1, 8);
    b.add_output("out", b.w_xor(x, y));
    Circuit circ = b.finish();

    auto rng = Rng::seeded(21);
    for (EngineMode mode : {EngineMode::semi_honest, EngineMode::malicious}) {
        int reps = mode == EngineMode::semi_honest ? 50 : 10;
        for (int rep = 0; rep < reps; ++rep) {
            uint8_t xv = static_cast<uint8_t>(rng.u64());
            uint8_t yv = static_cast<uint8_t>(rng.u64());
            auto xb = bits_from_u128(xv, 8), yb = bits_from_u128(yv, 8);
            Harness h{circ, mode, 0, 100 + static_cast<uint64_t>(rep)};
            auto [o0, o1] = h.run(xb, yb);
            REQUIRE(!o0.err);
            REQUIRE(!o1.err);
            CHECK(bits_to_u128(o0.out) == u128(xv ^ yv));
            CHECK(o1.out.empty());  // non-receiver learns nothing
        }
    }
}

TEST_CASE("and gate: exhaustive wire values, several triple draws") {
    Builder b;
    auto x = b.add_input("x", InputRole::Party0, 1);
    auto y = b.add_input("y", InputRole::Party1, 1);
    b.add_output("out", Builder::Word{b.gand(x[0], y[0])});
    Circuit circ = b.finish();

    for (uint8_t xv : {0, 1})
        for (uint8_t yv : {0, 1})
            for (uint64_t draw = 0; draw < 8; ++draw)
                for (EngineMode mode : {EngineMode::semi_honest, EngineMode::malicious}) {
                    Harness h{circ, mode, 0, 1000 + draw};
                    auto [o0, o1] =
                        h.run(std::vector<uint8_t>{xv}, std::vector<uint8_t>{yv});
                    REQUIRE(!o0.err);
                    REQUIRE(!o1.err);
                    REQUIRE(o0.out.size() == 1);
                    CHECK(o0.out[0] == (xv & yv));
                    CHECK(o0.triples == 1);
                    CHECK(o1.triples == 1);
                }
}

TEST_CASE("ot-generated triples satisfy the multiplication invariant") {
    auto [cA, cB] = make_mem_pair();
    const size_t n = 10000;
    std::vector<BitTriple> t0, t1;
    std::thread peer([&] {
        auto rng = Rng::seeded(31);
        t1 = gen_triples_ot(*cB, 5, 1, n, rng);
    });
    auto rng = Rng::seeded(32);
    t0 = gen_triples_ot(*cA, 5, 0, n, rng);
    peer.join();

    REQUIRE(t0.size() == n);
    REQUIRE(t1.size() == n);
    size_t ok = 0, a_ones = 0;
    for (size_t i = 0; i < n; ++i) {
        uint8_t av = t0[i].a ^ t1[i].a;
        uint8_t bv = t0[i].b ^ t1[i].b;
        uint8_t cv = t0[i].c ^ t1[i].c;
        if (cv == (av & bv)) ++ok;
        a_ones += av;
    }
    CHECK(ok == n);
    // plaintext triple values look uniform
    CHECK(a_ones > n / 2 - 300);
    CHECK(a_ones < n / 2 + 300);

    // zero-count request short-circuits without any traffic
    uint64_t before = cA->bytes_sent();
    auto rng2 = Rng::seeded(33);
    CHECK(gen_triples_ot(*cA, 6, 0, 0, rng2).empty());
    CHECK(cA->bytes_sent() == before);
}

TEST_CASE("dealer material is internally consistent") {
    auto rng = Rng::seeded(41);
    GF128 d0 = GF128::random(rng), d1 = GF128::random(rng), dz = GF128::random(rng);
    DealerState st(Rng::seeded(42));
    st.set_delta(0, d0);
    st.set_delta(1, d1);
    st.set_zk_delta(dz);

    auto s0 = st.take_semi(0, 500);
    auto s1 = st.take_semi(1, 500);
    for (size_t i = 0; i < 500; ++i)
        CHECK(((s0[i].a ^ s1[i].a) & (s0[i].b ^ s1[i].b)) == (s0[i].c ^ s1[i].c));

    auto a0 = st.take_auth(0, 300);
    auto a1 = st.take_auth(1, 300);
    for (size_t i = 0; i < 300; ++i) {
        const AuthShare* p0[] = {&a0[i].a, &a0[i].b, &a0[i].c};
        const AuthShare* p1[] = {&a1[i].a, &a1[i].b, &a1[i].c};
        for (int j = 0; j < 3; ++j) {
            CHECK(p0[j]->tag == (p1[j]->key ^ d1.masked(p0[j]->bit)));
            CHECK(p1[j]->tag == (p0[j]->key ^ d0.masked(p1[j]->bit)));
        }
        CHECK(((a0[i].a.bit ^ a1[i].a.bit) & (a0[i].b.bit ^ a1[i].b.bit)) ==
              (a0[i].c.bit ^ a1[i].c.bit));
    }

    auto m0 = st.take_auth_bits(0, 200);
    auto m1 = st.take_auth_bits(1, 200);
    for (size_t i = 0; i < 200; ++i) {
        CHECK(m0[i].tag == (m1[i].key ^ d1.masked(m0[i].bit)));
        CHECK(m1[i].tag == (m0[i].key ^ d0.masked(m1[i].bit)));
    }

    auto zp = st.take_zk_prover(200);
    auto zv = st.take_zk_verifier(200);
    for (size_t i = 0; i < 200; ++i) {
        CHECK(zp[i].ma == (zv[i].ka ^ dz.masked(zp[i].xa)));
        CHECK(zp[i].mb == (zv[i].kb ^ dz.masked(zp[i].xb)));
        CHECK(zp[i].mc == (zv[i].kc ^ dz.masked(zp[i].xc)));
        CHECK(zp[i].xc == (zp[i].xa & zp[i].xb));
    }

    // staggered takes line up: each party's cursor is independent
    auto more0 = st.take_semi(0, 100);
    auto more1a = st.take_semi(1, 40);
    auto more1b = st.take_semi(1, 60);
    for (size_t i = 0; i < 100; ++i) {
        const BitTriple& q1 = i < 40 ? more1a[i] : more1b[i - 40];
        CHECK(((more0[i].a ^ q1.a) & (more0[i].b ^ q1.b)) == (more0[i].c ^ q1.c));
    }
}

TEST_CASE("dealer wire blocks round trip") {
    auto rng = Rng::seeded(51);
    DealerState st(Rng::seeded(52));
    st.set_delta(0, GF128::random(rng));
    st.set_delta(1, GF128::random(rng));
    st.set_zk_delta(GF128::random(rng));

    MaterialKind kind{};
    int view = -1;
    uint32_t count = 0;
    dealer_wire::decode_request(dealer_wire::encode_request(MaterialKind::auth_bit, 1, 777),
                                kind, view, count);
    CHECK(kind == MaterialKind::auth_bit);
    CHECK(view == 1);
    CHECK(count == 777);

    auto semi = st.take_semi(0, 77);
    auto semi2 = dealer_wire::decode_semi(dealer_wire::encode_semi(semi));
    REQUIRE(semi2.size() == semi.size());
    for (size_t i = 0; i < semi.size(); ++i) {
        CHECK(semi[i].a == semi2[i].a);
        CHECK(semi[i].b == semi2[i].b);
        CHECK(semi[i].c == semi2[i].c);
    }
    auto auth = st.take_auth(1, 33);
    auto auth2 = dealer_wire::decode_auth(dealer_wire::encode_auth(auth));
    REQUIRE(auth2.size() == auth.size());
    for (size_t i = 0; i < auth.size(); ++i) {
        CHECK(auth[i].a.bit == auth2[i].a.bit);
        CHECK(auth[i].b.tag == auth2[i].b.tag);
        CHECK(auth[i].c.key == auth2[i].c.key);
    }
    auto ab = st.take_auth_bits(0, 19);
    auto ab2 = dealer_wire::decode_auth_bits(dealer_wire::encode_auth_bits(ab));
    REQUIRE(ab2.size() == ab.size());
    for (size_t i = 0; i < ab.size(); ++i) {
        CHECK(ab[i].bit == ab2[i].bit);
        CHECK(ab[i].tag == ab2[i].tag);
        CHECK(ab[i].key == ab2[i].key);
    }
    auto zp = st.take_zk_prover(21);
    auto zp2 = dealer_wire::decode_zk_prover(dealer_wire::encode_zk_prover(zp));
    REQUIRE(zp2.size() == zp.size());
    for (size_t i = 0; i < zp.size(); ++i) {
        CHECK(zp[i].xa == zp2[i].xa);
        CHECK(zp[i].mc == zp2[i].mc);
    }
    auto zv = st.take_zk_verifier(21);
    auto zv2 = dealer_wire::decode_zk_verifier(dealer_wire::encode_zk_verifier(zv));
    REQUIRE(zv2.size() == zv.size());
    for (size_t i = 0; i < zv.size(); ++i) CHECK(zv[i].kb == zv2[i].kb);
}

TEST_CASE("dealer client served over a channel matches the local views") {
    auto rng = Rng::seeded(55);
    GF128 d0 = GF128::random(rng), d1 = GF128::random(rng);
    DealerState st(Rng::seeded(56));
    st.set_delta(0, d0);
    st.set_delta(1, d1);

    auto [cli_ch, srv_ch] = make_mem_pair();
    std::thread server([&] {
        for (int i = 0; i < 4; ++i) {
            Frame f = srv_ch->recv();
            REQUIRE(f.type == msg::TRIPLE_REQ);
            srv_ch->send(Frame{msg::TRIPLE_BLOCK, f.session_id,
                               serve_dealer_request(st, f.payload)});
        }
    });
    DealerClient c0(*cli_ch, 9, 0);
    DealerClient c1(*cli_ch, 9, 1);
    auto g0 = c0.semi_triples(50);
    auto g1 = c1.semi_triples(50);
    REQUIRE(g0.size() == 50);
    REQUIRE(g1.size() == 50);
    for (size_t i = 0; i < 50; ++i)
        CHECK(((g0[i].a ^ g1[i].a) & (g0[i].b ^ g1[i].b)) == (g0[i].c ^ g1[i].c));
    auto h0 = c0.auth_bits(10);
    auto h1 = c1.auth_bits(10);
    REQUIRE(h0.size() == 10);
    REQUIRE(h1.size() == 10);
    for (size_t i = 0; i < 10; ++i) {
        CHECK(h0[i].tag == (h1[i].key ^ d1.masked(h0[i].bit)));
        CHECK(h1[i].tag == (h0[i].key ^ d0.masked(h1[i].bit)));
    }
    server.join();
}

TEST_CASE("trajectory circuit matches the plain oracle under both modes") {
    FpParams p(16, 8);
    Circuit circ = optimize(build_trajectory(p));
    auto rng = Rng::seeded(61);

    for (EngineMode mode : {EngineMode::semi_honest, EngineMode::malicious}) {
        int reps = mode == EngineMode::semi_honest ? 100 : 8;
        for (int rep = 0; rep < reps; ++rep) {
            Vec3 sat = random_vec3(p, rng, 6);
            Vec3 air = random_vec3(p, rng, 6);
            if (sat.x.raw() == air.x.raw() && sat.y.raw() == air.y.raw() &&
                sat.z.raw() == air.z.raw())
                continue;
            Harness h{circ, mode, 0, 7000 + static_cast<uint64_t>(rep)};
            auto [o0, o1] = h.run(vec3_bits(sat), vec3_bits(air));
            REQUIRE(!o0.err);
            REQUIRE(!o1.err);
            REQUIRE(o0.out.size() == static_cast<size_t>(3 * p.k));
            Vec3 expect = trajectory_plain(sat, air);
            auto comps = expect.comps();
            for (int c = 0; c < 3; ++c) {
                u128 got = bits_to_u128(std::span<const uint8_t>(o0.out).subspan(
                    static_cast<size_t>(c) * static_cast<size_t>(p.k),
                    static_cast<size_t>(p.k)));
                CHECK(got == comps[static_cast<size_t>(c)].raw());
            }
            CHECK(o1.out.empty());
        }
    }
}

TEST_CASE("degenerate equal locations give the all-zero vector") {
    FpParams p(16, 8);
    Circuit circ = optimize(build_trajectory(p));
    Vec3 loc{FixedPoint::encode(3.5, p), FixedPoint::encode(-2.25, p),
             FixedPoint::encode(0.75, p)};
    Harness h{circ, EngineMode::semi_honest, 0, 71};
    auto [o0, o1] = h.run(vec3_bits(loc), vec3_bits(loc));
    REQUIRE(!o0.err);
    REQUIRE(!o1.err);
    for (uint8_t b : o0.out) CHECK(b == 0);
}

TEST_CASE("range circuit matches the plain containment oracle") {
    FpParams p(16, 8);
    Circuit circ = optimize(build_range_check(p));
    auto rng = Rng::seeded(81);
    int inside = 0;
    for (int rep = 0; rep < 60; ++rep) {
        Vec3 loc = random_vec3(p, rng, 5);
        std::vector<FixedPoint> mins, maxs;
        for (int c = 0; c < 3; ++c) {
            mpz_class base;
            mpz_class span(static_cast<unsigned long>(rng.below(1u << 6)));
            if (rep % 2 == 0) {
                // box around the location: containment guaranteed
                base = loc.comps()[static_cast<size_t>(c)].signed_raw() -
                       static_cast<long>(rng.below(8));
                span += 8;
            } else {
                base = static_cast<long>(rng.below(64)) - 32;
            }
            mins.push_back(FixedPoint::from_signed(base, p));
            maxs.push_back(FixedPoint::from_signed(base + span, p));
        }
        Bounds b{mins[0], maxs[0], mins[1], maxs[1], mins[2], maxs[2]};
        uint8_t expect = in_bounds_plain(loc, b);
        inside += expect;

        // The witness location belongs to party 1, the public bounds to party 0.
        std::vector<uint8_t> pub;
        for (const FixedPoint& v : b.comps()) {
            auto bb = fp_bits(v);
            pub.insert(pub.end(), bb.begin(), bb.end());
        }
        Harness h{circ, EngineMode::semi_honest, 0, 9000 + static_cast<uint64_t>(rep)};
        auto [o0, o1] = h.run(pub, vec3_bits(loc));
        REQUIRE(!o0.err);
        REQUIRE(!o1.err);
        REQUIRE(o0.out.size() == 1);
        CHECK(o0.out[0] == expect);
    }
    CHECK(inside >= 30);  // even reps are inside by construction
    CHECK(inside < 55);   // random odd reps mostly fall outside
}

TEST_CASE("communication is a function of the circuit, not the inputs") {
    FpParams p(8, 4);
    Circuit circ = optimize(build_trajectory(p));
    auto rng = Rng::seeded(91);
    for (EngineMode mode : {EngineMode::semi_honest, EngineMode::malicious}) {
        uint64_t b0 = 0, b1 = 0;
        for (int rep = 0; rep < 3; ++rep) {
            Vec3 sat = random_vec3(p, rng, 3);
            Vec3 air = random_vec3(p, rng, 3);
            Harness h{circ, mode, 0, 400 + static_cast<uint64_t>(rep)};
            auto [o0, o1] = h.run(vec3_bits(sat), vec3_bits(air));
            REQUIRE(!o0.err);
            REQUIRE(!o1.err);
            if (rep == 0) {
                b0 = o0.bytes_sent;
                b1 = o1.bytes_sent;
            } else {
                CHECK(o0.bytes_sent == b0);
                CHECK(o1.bytes_sent == b1);
            }
        }
        CHECK(b0 > 0);
        CHECK(b1 > 0);
    }
}

TEST_CASE("malicious mode detects tampered openings, tags, and output shares") {
    FpParams p(8, 4);
    Circuit circ = optimize(build_trajectory(p));
    auto rng = Rng::seeded(101);
    Vec3 sat = random_vec3(p, rng, 3);
    Vec3 air = random_vec3(p, rng, 3);

    SUBCASE("flipped opened bit") {
        bool done = false;
        Harness h{circ, EngineMode::malicious, 0, 111};
        h.hook1 = [&](Frame& f) {
            if (!done && f.type == msg::OPEN_BATCH && f.payload.size() > 4) {
                f.payload[4] ^= 0x01;  // first packed masked-opening byte
                done = true;
            }
        };
        auto [o0, o1] = h.run(vec3_bits(sat), vec3_bits(air));
        REQUIRE(done);
        REQUIRE(o0.err);
        CHECK_THROWS_AS(std::rethrow_exception(o0.err), CheatDetected);
    }

    SUBCASE("forged opening tag") {
        bool done = false;
        Harness h{circ, EngineMode::malicious, 0, 112};
        h.hook1 = [&](Frame& f) {
            if (!done && f.type == msg::OPEN_BATCH && f.payload.size() > 40) {
                f.payload.back() ^= 0x80;  // inside the trailing tag block
                done = true;
            }
        };
        auto [o0, o1] = h.run(vec3_bits(sat), vec3_bits(air));
        REQUIRE(done);
        REQUIRE(o0.err);
        CHECK_THROWS_AS(std::rethrow_exception(o0.err), CheatDetected);
    }

    SUBCASE("tampered output share") {
        bool done = false;
        Harness h{circ, EngineMode::malicious, 0, 113};
        h.hook1 = [&](Frame& f) {
            if (f.type == msg::OUTPUT_SHARE && f.payload.size() > 4) {
                f.payload[4] ^= 0x01;
                done = true;
            }
        };
        auto [o0, o1] = h.run(vec3_bits(sat), vec3_bits(air));
        REQUIRE(done);
        REQUIRE(o0.err);
        CHECK_THROWS_AS(std::rethrow_exception(o0.err), CheatDetected);
    }

    SUBCASE("honest run on the same inputs matches the oracle") {
        Harness h{circ, EngineMode::malicious, 0, 114};
        auto [o0, o1] = h.run(vec3_bits(sat), vec3_bits(air));
        REQUIRE(!o0.err);
        REQUIRE(!o1.err);
        Vec3 expect = trajectory_plain(sat, air);
        auto comps = expect.comps();
        for (size_t c = 0; c < 3; ++c)
            CHECK(bits_to_u128(std::span<const uint8_t>(o0.out).subspan(
                      c * static_cast<size_t>(p.k), static_cast<size_t>(p.k))) ==
                  comps[c].raw());
    }
}

TEST_CASE("opened masked bits look uniform") {
    FpParams p(8, 4);
    Circuit circ = optimize(build_trajectory(p));
    auto rng = Rng::seeded(121);
    size_t ones = 0, total = 0;
    for (int rep = 0; rep < 6; ++rep) {
        Vec3 sat = random_vec3(p, rng, 3);
        Vec3 air = random_vec3(p, rng, 3);
        Harness h{circ, EngineMode::semi_honest, 0, 500 + static_cast<uint64_t>(rep)};
        auto [o0, o1] = h.run(vec3_bits(sat), vec3_bits(air));
        REQUIRE(!o0.err);
        for (uint8_t v : o0.opened) ones += v;
        total += o0.opened.size();
    }
    REQUIRE(total > 8000);
    double freq = double(ones) / double(total);
    double sigma = 0.5 / std::sqrt(double(total));
    CHECK(std::abs(freq - 0.5) < 4 * sigma);
}

TEST_CASE("triple pool reports a hard error on exhaustion") {
    auto rng = Rng::seeded(131);
    DealerState st(Rng::seeded(132));
    st.set_delta(0, GF128::random(rng));
    st.set_delta(1, GF128::random(rng));

    PoolSource pool;
    pool.add_semi(st.take_semi(0, 5));
    pool.add_auth(st.take_auth(0, 4));
    pool.add_auth_bits(st.take_auth_bits(0, 3));
    CHECK(pool.semi_available() == 5);
    CHECK(pool.semi_triples(3).size() == 3);
    CHECK(pool.semi_available() == 2);
    CHECK_THROWS_AS(pool.semi_triples(3), Error);
    CHECK(pool.auth_triples(4).size() == 4);
    CHECK_THROWS_AS(pool.auth_triples(1), Error);
    CHECK(pool.auth_bits(3).size() == 3);
    CHECK_THROWS_AS(pool.auth_bits(1), Error);
}

TEST_CASE("triples consumed equals the circuit and count") {
    FpParams p(8, 4);
    Circuit circ = optimize(build_trajectory(p));
    CompiledCircuit cc = CompiledCircuit::compile(circ);
    auto rng = Rng::seeded(141);
    Vec3 sat = random_vec3(p, rng, 3);
    Vec3 air = random_vec3(p, rng, 3);
    Harness h{circ, EngineMode::semi_honest, 0, 151};
    auto [o0, o1] = h.run(vec3_bits(sat), vec3_bits(air));
    REQUIRE(!o0.err);
    REQUIRE(!o1.err);
    CHECK(o0.triples == cc.and_count);
    CHECK(o1.triples == cc.and_count);
}
