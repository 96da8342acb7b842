#include "skyveil/ot.hpp"

#include <sodium.h>

#include <cstring>

#include "skyveil/errors.hpp"
#include "skyveil/hashing.hpp"
#include "skyveil/messages.hpp"
#include "skyveil/wire.hpp"

namespace skyveil {

namespace {

constexpr size_t kPoint = crypto_core_ristretto255_BYTES;
constexpr size_t kScalar = crypto_core_ristretto255_SCALARBYTES;

void put_element(Writer& w, const uint8_t* p) {
    w.u16(static_cast<uint16_t>(kPoint));
    w.bytes(std::span<const uint8_t>(p, kPoint));
}

std::vector<uint8_t> get_element(Reader& r) {
    uint16_t len = r.u16();
    if (len != kPoint) throw ProtocolError("unexpected group element length");
    auto p = r.raw(len);
    if (!crypto_core_ristretto255_is_valid_point(p.data()))
        throw ProtocolError("invalid group element");
    return p;
}

// Key for one instance: hash of the shared point bound to the session and
// the instance index so transcripts cannot be replayed across contexts.
Digest32 instance_key(uint64_t session_id, uint64_t index, const uint8_t* point) {
    Writer w;
    w.u64(session_id);
    w.u64(index);
    w.bytes(std::span<const uint8_t>(point, kPoint));
    auto buf = w.take();
    return blake2b256("ot-key", buf);
}

// Expand a 32-byte key into an L-byte pad.
std::vector<uint8_t> pad(const Digest32& key, size_t len) {
    std::vector<uint8_t> out;
    out.reserve(len);
    for (uint32_t block = 0; out.size() < len; ++block) {
        Writer w;
        w.bytes(key);
        w.u32(block);
        auto buf = w.take();
        Digest32 d = blake2b256("ot-pad", buf);
        size_t take = std::min(d.size(), len - out.size());
        out.insert(out.end(), d.begin(), d.begin() + static_cast<ptrdiff_t>(take));
    }
    return out;
}

std::vector<uint8_t> mask(std::span<const uint8_t> m, const Digest32& key) {
    auto p = pad(key, m.size());
    for (size_t i = 0; i < m.size(); ++i) p[i] ^= m[i];
    return p;
}

}  // namespace

void ot_send(Channel& ch, uint64_t session_id, std::span<const OtPair> pairs) {
    if (sodium_init() < 0) throw Error("libsodium init failed");
    for (const OtPair& p : pairs)
        if (p.m0.size() != p.m1.size()) throw Error("message pair lengths differ");

    uint8_t a[kScalar], A[kPoint];
    crypto_core_ristretto255_scalar_random(a);
    if (crypto_scalarmult_ristretto255_base(A, a) != 0) throw Error("scalar base mult failed");

    Writer s1;
    s1.u8(kGroupRistretto255);
    put_element(s1, A);
    ch.send(Frame{msg::OT_S1, session_id, s1.take()});

    Frame r1 = ch.expect(msg::OT_R1);
    Reader rr(r1.payload);
    if (rr.u8() != kGroupRistretto255) throw ProtocolError("group mismatch");
    if (rr.u32() != pairs.size()) throw ProtocolError("wrong number of receiver elements");

    Writer s2;
    s2.u32(static_cast<uint32_t>(pairs.size()));
    for (size_t i = 0; i < pairs.size(); ++i) {
        auto B = get_element(rr);
        uint8_t s0[kPoint], diff[kPoint], s1p[kPoint];
        // Shared point for choice 0: a*B. For choice 1: a*(B - A).
        if (crypto_scalarmult_ristretto255(s0, a, B.data()) != 0)
            throw ProtocolError("degenerate receiver element");
        if (crypto_core_ristretto255_sub(diff, B.data(), A) != 0 ||
            crypto_scalarmult_ristretto255(s1p, a, diff) != 0)
            throw ProtocolError("degenerate receiver element");
        auto c0 = mask(pairs[i].m0, instance_key(session_id, i, s0));
        auto c1 = mask(pairs[i].m1, instance_key(session_id, i, s1p));
        s2.u16(static_cast<uint16_t>(c0.size()));
        s2.bytes(c0);
        s2.u16(static_cast<uint16_t>(c1.size()));
        s2.bytes(c1);
    }
    rr.expect_end();
    ch.send(Frame{msg::OT_S2, session_id, s2.take()});
}

std::vector<std::vector<uint8_t>> ot_recv(Channel& ch, uint64_t session_id,
                                          std::span<const uint8_t> choices) {
    if (sodium_init() < 0) throw Error("libsodium init failed");

    Frame f1 = ch.expect(msg::OT_S1);
    Reader r1(f1.payload);
    if (r1.u8() != kGroupRistretto255) throw ProtocolError("group mismatch");
    auto A = get_element(r1);
    r1.expect_end();

    std::vector<std::array<uint8_t, kScalar>> secrets(choices.size());
    Writer wr;
    wr.u8(kGroupRistretto255);
    wr.u32(static_cast<uint32_t>(choices.size()));
    for (size_t i = 0; i < choices.size(); ++i) {
        uint8_t B[kPoint];
        crypto_core_ristretto255_scalar_random(secrets[i].data());
        if (crypto_scalarmult_ristretto255_base(B, secrets[i].data()) != 0)
            throw Error("scalar base mult failed");
        if (choices[i] & 1) {
            if (crypto_core_ristretto255_add(B, A.data(), B) != 0)
                throw ProtocolError("group addition failed");
        }
        put_element(wr, B);
    }
    ch.send(Frame{msg::OT_R1, session_id, wr.take()});

    Frame f2 = ch.expect(msg::OT_S2);
    Reader r2(f2.payload);
    if (r2.u32() != choices.size()) throw ProtocolError("wrong number of ciphertexts");
    std::vector<std::vector<uint8_t>> out(choices.size());
    for (size_t i = 0; i < choices.size(); ++i) {
        auto c0 = r2.raw(r2.u16());
        auto c1 = r2.raw(r2.u16());
        if (c0.size() != c1.size()) throw ProtocolError("ciphertext lengths differ");
        uint8_t shared[kPoint];
        if (crypto_scalarmult_ristretto255(shared, secrets[i].data(), A.data()) != 0)
            throw ProtocolError("degenerate sender element");
        out[i] = mask((choices[i] & 1) ? c1 : c0, instance_key(session_id, i, shared));
        sodium_memzero(secrets[i].data(), kScalar);
    }
    r2.expect_end();
    return out;
}

std::vector<GF128> cot_send(Channel& ch, uint64_t session_id, const GF128& delta,
                            size_t count, Rng& rng) {
    std::vector<GF128> keys(count);
    std::vector<OtPair> pairs(count);
    for (size_t i = 0; i < count; ++i) {
        keys[i] = GF128::random(rng);
        auto k0 = keys[i].to_bytes();
        auto k1 = (keys[i] ^ delta).to_bytes();
        pairs[i].m0.assign(k0.begin(), k0.end());
        pairs[i].m1.assign(k1.begin(), k1.end());
    }
    ot_send(ch, session_id, pairs);
    return keys;
}

std::vector<GF128> cot_recv(Channel& ch, uint64_t session_id,
                            std::span<const uint8_t> choices) {
    auto msgs = ot_recv(ch, session_id, choices);
    std::vector<GF128> tags(msgs.size());
    for (size_t i = 0; i < msgs.size(); ++i) {
        if (msgs[i].size() != 16) throw ProtocolError("correlated OT message length");
        tags[i] = GF128::from_bytes(msgs[i]);
    }
    return tags;
}

}  // namespace skyveil
