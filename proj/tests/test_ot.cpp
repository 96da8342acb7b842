#include <doctest.h>

#include <cmath>
#include <thread>

#include "skyveil/channel.hpp"
#include "skyveil/ot.hpp"
#include "skyveil/rng.hpp"

using namespace skyveil;

namespace {

// Run sender and receiver concurrently over an in-memory pair.
std::vector<std::vector<uint8_t>> loopback(std::span<const OtPair> pairs,
                                           std::span<const uint8_t> choices,
                                           uint64_t sid = 1) {
    auto [cs, cr] = make_mem_pair();
    std::exception_ptr sender_err;
    std::thread snd([&] {
        try {
            ot_send(*cs, sid, pairs);
        } catch (...) {
            sender_err = std::current_exception();
        }
    });
    std::vector<std::vector<uint8_t>> got;
    std::exception_ptr recv_err;
    try {
        got = ot_recv(*cr, sid, choices);
    } catch (...) {
        recv_err = std::current_exception();
    }
    snd.join();
    if (sender_err) std::rethrow_exception(sender_err);
    if (recv_err) std::rethrow_exception(recv_err);
    return got;
}

}  // namespace

TEST_CASE("receiver always gets the chosen message") {
    auto rng = Rng::seeded(11);
    for (int rep = 0; rep < 100; ++rep) {
        OtPair p;
        p.m0.resize(1 + rng.below(40));
        p.m1.resize(p.m0.size());
        rng.fill(p.m0);
        rng.fill(p.m1);
        for (uint8_t choice : {0, 1}) {
            auto got = loopback({&p, 1}, {&choice, 1});
            REQUIRE(got.size() == 1);
            CHECK(got[0] == (choice ? p.m1 : p.m0));
        }
    }
}

TEST_CASE("thousand-instance batch matches choices") {
    auto rng = Rng::seeded(12);
    const size_t n = 1000;
    std::vector<OtPair> pairs(n);
    std::vector<uint8_t> choices(n);
    for (size_t i = 0; i < n; ++i) {
        pairs[i].m0.resize(16);
        pairs[i].m1.resize(16);
        rng.fill(pairs[i].m0);
        rng.fill(pairs[i].m1);
        choices[i] = rng.bit();
    }
    auto got = loopback(pairs, choices, 99);
    size_t ok = 0;
    for (size_t i = 0; i < n; ++i)
        if (got[i] == (choices[i] ? pairs[i].m1 : pairs[i].m0)) ++ok;
    CHECK(ok == n);
}

TEST_CASE("correlated OT: every tag differs from its key by 0 or delta") {
    auto rng = Rng::seeded(13);
    GF128 delta = GF128::random(rng);
    const size_t n = 256;
    std::vector<uint8_t> choices(n);
    for (auto& c : choices) c = rng.bit();

    auto [cs, cr] = make_mem_pair();
    std::vector<GF128> keys;
    std::thread snd([&] { keys = cot_send(*cs, 7, delta, n, rng); });
    auto tags = cot_recv(*cr, 7, choices);
    snd.join();

    REQUIRE(keys.size() == n);
    REQUIRE(tags.size() == n);
    for (size_t i = 0; i < n; ++i) {
        GF128 d = tags[i] ^ keys[i];
        if (choices[i])
            CHECK(d == delta);
        else
            CHECK(d.is_zero());
    }
}

TEST_CASE("receiver transcript shows no per-bit bias between choices") {
    // Capture the receiver's B elements with a tamper hook and compare the
    // empirical bit distribution for choice=0 vs choice=1 instances.
    auto rng = Rng::seeded(14);
    const size_t n = 2000;
    std::vector<uint8_t> choices(n);
    for (auto& c : choices) c = rng.bit();
    std::vector<OtPair> pairs(n);
    for (auto& p : pairs) {
        p.m0.assign(8, 0);
        p.m1.assign(8, 1);
    }

    std::vector<uint8_t> captured;  // OT_R1 payload
    auto [cs, cr] = make_mem_pair();
    TamperChannel tampered(std::move(cr), [&](Frame& f) {
        if (f.type == 0x11) captured = f.payload;
    });
    std::thread snd([&] { ot_send(*cs, 3, pairs); });
    ot_recv(tampered, 3, choices);
    snd.join();

    REQUIRE(!captured.empty());
    // payload: u8 group, u32 count, then n x (u16 len, 32 bytes)
    const size_t header = 1 + 4;
    REQUIRE(captured.size() == header + n * 34);
    double count1[256] = {0}, count_total1 = 0, count0[256] = {0}, count_total0 = 0;
    for (size_t i = 0; i < n; ++i) {
        const uint8_t* el = captured.data() + header + i * 34 + 2;
        double* cnt = choices[i] ? count1 : count0;
        (choices[i] ? count_total1 : count_total0) += 1;
        for (int bit = 0; bit < 256; ++bit)
            cnt[bit] += (el[bit / 8] >> (bit % 8)) & 1;
    }
    REQUIRE(count_total0 > 100);
    REQUIRE(count_total1 > 100);
    int outliers = 0;
    for (int bit = 0; bit < 256; ++bit) {
        double p0 = count0[bit] / count_total0;
        double p1 = count1[bit] / count_total1;
        double pooled = (count0[bit] + count1[bit]) / (count_total0 + count_total1);
        double var = pooled * (1 - pooled) * (1 / count_total0 + 1 / count_total1);
        // Constant bits (e.g. a canonical-encoding top bit) have zero variance
        // in both groups and carry no choice information.
        if (var == 0) continue;
        if (std::abs(p0 - p1) > 5 * std::sqrt(var)) ++outliers;
    }
    CHECK(outliers == 0);
}

TEST_CASE("invalid group elements abort the protocol") {
    auto [cs, cr] = make_mem_pair();
    // Overwrite the sender's A element with a non-canonical encoding.
    auto tampered = std::make_unique<TamperChannel>(std::move(cs), [](Frame& f) {
        if (f.type == 0x10)
            for (size_t i = 3; i < f.payload.size(); ++i) f.payload[i] = 0xFF;
    });
    OtPair p;
    p.m0.assign(4, 0);
    p.m1.assign(4, 1);
    std::exception_ptr sender_err;
    std::thread snd([&sender_err, &p, ch = std::move(tampered)]() mutable {
        try {
            ot_send(*ch, 5, {&p, 1});
        } catch (...) {
            sender_err = std::current_exception();
        }
        ch.reset();
    });
    uint8_t choice = 1;
    CHECK_THROWS_AS(ot_recv(*cr, 5, {&choice, 1}), ProtocolError);
    cr.reset();  // unblocks the sender waiting for a reply that never comes
    snd.join();
    CHECK(sender_err != nullptr);
}

TEST_CASE("batch length mismatch is rejected") {
    auto [cs, cr] = make_mem_pair();
    std::vector<OtPair> pairs(3);
    for (auto& p : pairs) {
        p.m0.assign(2, 7);
        p.m1.assign(2, 9);
    }
    std::exception_ptr sender_err;
    std::thread snd([&sender_err, &pairs, ch = std::move(cs)]() mutable {
        try {
            ot_send(*ch, 6, pairs);
        } catch (...) {
            sender_err = std::current_exception();
        }
        ch.reset();  // closing the channel fails the blocked receiver too
    });
    std::vector<uint8_t> choices(2, 0);  // receiver expects fewer instances
    CHECK_THROWS_AS(ot_recv(*cr, 6, choices), ProtocolError);
    snd.join();
    REQUIRE(sender_err != nullptr);
    CHECK_THROWS_AS(std::rethrow_exception(sender_err), ProtocolError);
}

TEST_CASE("pairs with unequal message lengths are refused") {
    auto [cs, cr] = make_mem_pair();
    (void)cr;
    OtPair p;
    p.m0.assign(3, 0);
    p.m1.assign(4, 0);
    CHECK_THROWS_AS(ot_send(*cs, 1, {&p, 1}), Error);
}
