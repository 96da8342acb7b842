#include "skyveil/zkrange.hpp"

#include <algorithm>

#include "skyveil/bristol.hpp"
#include "skyveil/messages.hpp"
#include "skyveil/ot.hpp"
#include "skyveil/wire.hpp"

namespace skyveil {

namespace {

size_t witness_bit_count(const Circuit& c) {
    size_t n = 0;
    for (const InputGroup& g : c.inputs)
        if (g.role == InputRole::Witness) n += g.count;
    return n;
}

size_t public_bit_count(const Circuit& c) {
    size_t n = 0;
    for (const InputGroup& g : c.inputs)
        if (g.role != InputRole::Witness) n += g.count;
    return n;
}

constexpr uint8_t kSourceDealer = 0;
constexpr uint8_t kSourceVerifier = 1;

}  // namespace

const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::accepted: return "accepted";
        case Verdict::rejected_out_of_bounds: return "rejected(out-of-bounds)";
        case Verdict::rejected_cheat: return "rejected(cheat)";
    }
    return "unknown";
}

Digest32 circuit_digest(const Circuit& c) {
    std::string text = to_bristol(c);
    return blake2b256("circuit",
                      std::span<const uint8_t>(
                          reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

std::vector<uint8_t> range_witness_bits(const Vec3& loc) {
    std::vector<uint8_t> out;
    const int k = loc.params().k;
    out.reserve(static_cast<size_t>(3 * k));
    for (const FixedPoint& comp : loc.comps())
        for (int i = 0; i < k; ++i) out.push_back(comp.bit(i));
    return out;
}

std::vector<uint8_t> range_public_bits(const Bounds& bounds) {
    std::vector<uint8_t> out;
    const int k = bounds.params().k;
    out.reserve(static_cast<size_t>(6 * k));
    for (const FixedPoint& comp : bounds.comps())
        for (int i = 0; i < k; ++i) out.push_back(comp.bit(i));
    return out;
}

// ---------------------------------------------------------------------------
// Prover

ZkProverCtx::ZkProverCtx(const CompiledCircuit& cc, Channel& ch, uint64_t sid)
    : cc_(cc), c_(*cc.circuit), ch_(ch), sid_(sid) {}

void ZkProverCtx::advance(ZkStatus s) {
    if (s < status_) throw Error("proof session status went backwards");
    status_ = s;
}

void ZkProverCtx::absorb(uint8_t type, std::span<const uint8_t> payload) {
    transcript_.absorb(type, payload);
}

void ZkProverCtx::absorb_external(uint8_t type, std::span<const uint8_t> payload) {
    absorb(type, payload);
}

void ZkProverCtx::xor_public(uint32_t wire, uint8_t c) {
    if (c & 1) x_[wire] ^= 1;
}

void ZkProverCtx::eval_linear(const Gate& g) {
    if (g.kind == GateKind::Xor) {
        x_[g.out] = x_[g.in0] ^ x_[g.in1];
        m_[g.out] = m_[g.in0] ^ m_[g.in1];
    } else {  // Not
        x_[g.out] = x_[g.in0];
        m_[g.out] = m_[g.in0];
        xor_public(g.out, 1);
    }
}

void ZkProverCtx::commit(std::span<const uint8_t> witness_bits,
                         std::span<const uint8_t> public_bits) {
    if (status_ != ZkStatus::setup) throw Error("witness already committed");
    if (witness_bits.size() != witness_bit_count(c_))
        throw Error("witness bit count does not match the circuit");
    if (public_bits.size() != public_bit_count(c_))
        throw Error("public bit count does not match the circuit");

    x_.assign(c_.n_wires, 0);
    m_.assign(c_.n_wires, GF128::zero());
    xor_public(1, 1);  // constant-one wire

    Writer w;
    w.u32(static_cast<uint32_t>(witness_bits.size()));
    auto payload = w.take();
    ch_.send(Frame{msg::ZK_COT, sid_, payload});
    absorb(msg::ZK_COT, payload);

    std::vector<GF128> tags;
    if (!witness_bits.empty()) tags = cot_recv(ch_, sid_, witness_bits);

    size_t wi = 0, pi = 0;
    for (const InputGroup& grp : c_.inputs) {
        if (grp.role == InputRole::Witness) {
            for (uint32_t i = 0; i < grp.count; ++i, ++wi) {
                x_[grp.first + i] = witness_bits[wi] & 1;
                m_[grp.first + i] = tags[wi];
            }
        } else {
            for (uint32_t i = 0; i < grp.count; ++i, ++pi)
                xor_public(grp.first + i, public_bits[pi]);
        }
    }
    advance(ZkStatus::committed);
}

void ZkProverCtx::triples(ZkTripleSource* src, bool verifier_dealer) {
    if (status_ != ZkStatus::committed) throw Error("triples before commitment");
    Frame f = ch_.expect(msg::ZK_TRIPLES);
    Reader r(f.payload);
    uint8_t mode = r.u8();
    uint32_t n = r.u32();
    if (mode != (verifier_dealer ? kSourceVerifier : kSourceDealer))
        throw ProtocolError("triple source mode mismatch");
    if (n != cc_.and_count) throw ProtocolError("triple count mismatch");
    if (verifier_dealer) {
        pool_ = dealer_wire::decode_zk_prover(r.blob());
        if (pool_.size() != n) throw ProtocolError("triple block arity mismatch");
    } else {
        if (!src) throw ConfigError("a dealer triple source is required");
        pool_ = src->zk_prover_triples(n);
    }
    r.expect_end();
    absorb(msg::ZK_TRIPLES, f.payload);
}

void ZkProverCtx::evaluate() {
    if (status_ != ZkStatus::committed) throw Error("evaluate before commitment");
    if (pool_.size() != cc_.and_count) throw Error("triples not provisioned");

    for (uint32_t idx : cc_.prologue) eval_linear(c_.gates[idx]);

    for (const CompiledCircuit::Layer& layer : cc_.layers) {
        const size_t n = layer.ands.size();
        std::vector<uint8_t> de(2 * n);
        std::vector<GF128> detags(2 * n);
        for (size_t i = 0; i < n; ++i) {
            const Gate& g = c_.gates[layer.ands[i]];
            if (cursor_ >= pool_.size()) throw Error("triple pool exhausted");
            const ZkTripleProver& t = pool_[cursor_++];
            ++used_;
            uint8_t d = x_[g.in0] ^ t.xa;
            uint8_t e = x_[g.in1] ^ t.xb;
            de[2 * i] = d;
            de[2 * i + 1] = e;
            detags[2 * i] = m_[g.in0] ^ t.ma;
            detags[2 * i + 1] = m_[g.in1] ^ t.mb;
            x_[g.out] = t.xc ^ (d ? t.xb : 0) ^ (e ? t.xa : 0);
            m_[g.out] = t.mc ^ t.mb.masked(d) ^ t.ma.masked(e);
            xor_public(g.out, d & e);
        }
        Writer w;
        w.bits(de);
        for (const GF128& t : detags) w.gf(t);
        auto payload = w.take();
        ch_.send(Frame{msg::ZK_OPEN_BATCH, sid_, payload});
        absorb(msg::ZK_OPEN_BATCH, payload);
        for (uint32_t idx : layer.linear) eval_linear(c_.gates[idx]);
    }
}

std::vector<uint8_t> ZkProverCtx::open_outputs() {
    Writer w;
    std::vector<uint8_t> out;
    for (const OutputGroup& grp : c_.outputs)
        for (uint32_t i = 0; i < grp.count; ++i) out.push_back(x_[grp.first + i]);
    w.bits(out);
    for (const OutputGroup& grp : c_.outputs)
        for (uint32_t i = 0; i < grp.count; ++i) w.gf(m_[grp.first + i]);
    auto payload = w.take();
    ch_.send(Frame{msg::ZK_FINAL, sid_, payload});
    absorb(msg::ZK_FINAL, payload);
    advance(ZkStatus::checked);
    return out;
}

Verdict ZkProverCtx::verdict(bool interactive_coin) {
    if (interactive_coin) {
        Frame f = ch_.expect(msg::ZK_COIN);
        if (f.payload.size() != 16) throw ProtocolError("bad coin length");
        absorb(msg::ZK_COIN, f.payload);
    }
    Frame f = ch_.expect(msg::ZK_VERDICT);
    Reader r(f.payload);
    uint8_t v = r.u8();
    r.expect_end();
    if (v > static_cast<uint8_t>(Verdict::rejected_cheat))
        throw ProtocolError("unknown verdict code");
    advance(v == 0 ? ZkStatus::accepted : ZkStatus::rejected);
    return static_cast<Verdict>(v);
}

// ---------------------------------------------------------------------------
// Verifier

ZkVerifierCtx::ZkVerifierCtx(const CompiledCircuit& cc, Channel& ch, uint64_t sid,
                             const GF128& delta)
    : cc_(cc), c_(*cc.circuit), ch_(ch), sid_(sid), delta_(delta) {
    if (delta_.is_zero()) throw ConfigError("the global key must be nonzero");
}

void ZkVerifierCtx::advance(ZkStatus s) {
    if (s < status_) throw Error("proof session status went backwards");
    status_ = s;
}

void ZkVerifierCtx::absorb(uint8_t type, std::span<const uint8_t> payload) {
    transcript_.absorb(type, payload);
}

void ZkVerifierCtx::absorb_external(uint8_t type, std::span<const uint8_t> payload) {
    absorb(type, payload);
}

void ZkVerifierCtx::xor_public(uint32_t wire, uint8_t c) {
    if (c & 1) k_[wire] ^= delta_;
}

void ZkVerifierCtx::eval_linear(const Gate& g) {
    if (g.kind == GateKind::Xor) {
        k_[g.out] = k_[g.in0] ^ k_[g.in1];
    } else {  // Not
        k_[g.out] = k_[g.in0];
        xor_public(g.out, 1);
    }
}

void ZkVerifierCtx::commit(std::span<const uint8_t> public_bits, Rng& rng) {
    if (status_ != ZkStatus::setup) throw Error("witness already committed");
    if (public_bits.size() != public_bit_count(c_))
        throw Error("public bit count does not match the circuit");

    Frame f = ch_.expect(msg::ZK_COT);
    Reader r(f.payload);
    uint32_t n = r.u32();
    r.expect_end();
    absorb(msg::ZK_COT, f.payload);
    if (n != witness_bit_count(c_)) {
        try {
            ch_.send_error(sid_, errcode::CFG_MISMATCH, "witness arity mismatch");
        } catch (const Error&) {
        }
        throw ProtocolError("witness bit count does not match the circuit");
    }

    k_.assign(c_.n_wires, GF128::zero());
    xor_public(1, 1);  // constant-one wire

    std::vector<GF128> keys;
    if (n > 0) keys = cot_send(ch_, sid_, delta_, n, rng);

    size_t wi = 0, pi = 0;
    for (const InputGroup& grp : c_.inputs) {
        if (grp.role == InputRole::Witness) {
            for (uint32_t i = 0; i < grp.count; ++i, ++wi) k_[grp.first + i] = keys[wi];
        } else {
            for (uint32_t i = 0; i < grp.count; ++i, ++pi)
                xor_public(grp.first + i, public_bits[pi]);
        }
    }
    advance(ZkStatus::committed);
}

void ZkVerifierCtx::triples(ZkTripleSource* src, bool verifier_dealer, Rng& rng) {
    if (status_ != ZkStatus::committed) throw Error("triples before commitment");
    Writer w;
    w.u8(verifier_dealer ? kSourceVerifier : kSourceDealer);
    w.u32(cc_.and_count);
    if (verifier_dealer) {
        // Test-only: manufacturing both views locally means this verifier
        // knows the triple plaintexts and the openings are not masking.
        DealerState local(Rng::seeded(rng.u64()));
        local.set_zk_delta(delta_);
        auto prover_view = local.take_zk_prover(cc_.and_count);
        pool_ = local.take_zk_verifier(cc_.and_count);
        w.blob(dealer_wire::encode_zk_prover(prover_view));
    } else {
        if (!src) throw ConfigError("a dealer triple source is required");
        pool_ = src->zk_verifier_triples(cc_.and_count);
    }
    auto payload = w.take();
    ch_.send(Frame{msg::ZK_TRIPLES, sid_, payload});
    absorb(msg::ZK_TRIPLES, payload);
}

void ZkVerifierCtx::evaluate() {
    if (status_ != ZkStatus::committed) throw Error("evaluate before commitment");
    if (pool_.size() != cc_.and_count) throw Error("triples not provisioned");

    for (uint32_t idx : cc_.prologue) eval_linear(c_.gates[idx]);

    for (const CompiledCircuit::Layer& layer : cc_.layers) {
        const size_t n = layer.ands.size();
        Frame f = ch_.expect(msg::ZK_OPEN_BATCH);
        Reader r(f.payload);
        auto de = r.bits();
        if (de.size() != 2 * n) throw ProtocolError("open batch arity mismatch");
        std::vector<GF128> detags(2 * n);
        for (size_t i = 0; i < 2 * n; ++i) detags[i] = r.gf();
        r.expect_end();
        absorb(msg::ZK_OPEN_BATCH, f.payload);

        for (size_t i = 0; i < n; ++i) {
            const Gate& g = c_.gates[layer.ands[i]];
            if (cursor_ >= pool_.size()) throw Error("triple pool exhausted");
            const ZkTripleVerifier& t = pool_[cursor_++];
            ++used_;
            uint8_t d = de[2 * i] & 1;
            uint8_t e = de[2 * i + 1] & 1;
            opened_.push_back(d);
            opened_.push_back(e);
            opens_.push_back(OpenRec{d, detags[2 * i], k_[g.in0] ^ t.ka});
            opens_.push_back(OpenRec{e, detags[2 * i + 1], k_[g.in1] ^ t.kb});
            k_[g.out] = t.kc ^ t.kb.masked(d) ^ t.ka.masked(e);
            xor_public(g.out, d & e);
        }
        for (uint32_t idx : layer.linear) eval_linear(c_.gates[idx]);
    }
}

std::vector<uint8_t> ZkVerifierCtx::receive_outputs() {
    std::vector<uint32_t> wires;
    for (const OutputGroup& grp : c_.outputs)
        for (uint32_t i = 0; i < grp.count; ++i) wires.push_back(grp.first + i);

    Frame f = ch_.expect(msg::ZK_FINAL);
    Reader r(f.payload);
    auto out = r.bits();
    if (out.size() != wires.size()) throw ProtocolError("output arity mismatch");
    for (size_t i = 0; i < wires.size(); ++i) {
        GF128 tag = r.gf();
        opens_.push_back(OpenRec{static_cast<uint8_t>(out[i] & 1), tag, k_[wires[i]]});
    }
    r.expect_end();
    absorb(msg::ZK_FINAL, f.payload);
    return out;
}

bool ZkVerifierCtx::finalize(Rng& rng, bool interactive_coin) {
    if (interactive_coin) {
        std::vector<uint8_t> coin(16);
        rng.fill(coin);
        ch_.send(Frame{msg::ZK_COIN, sid_, coin});
        absorb(msg::ZK_COIN, coin);
    }
    Digest32 seed = transcript_.digest();
    ChiStream chi(seed);
    GF128 acc = GF128::zero();
    for (size_t i = 0; i < opens_.size(); ++i) {
        const OpenRec& rec = opens_[i];
        acc ^= gf_mul(chi.at(i), rec.tag ^ rec.key ^ delta_.masked(rec.bit));
    }
    advance(ZkStatus::checked);
    return acc.is_zero();
}

void ZkVerifierCtx::send_verdict(Verdict v) {
    Writer w;
    w.u8(static_cast<uint8_t>(v));
    try {
        ch_.send(Frame{msg::ZK_VERDICT, sid_, w.take()});
    } catch (const Error&) {
        // best effort: the prover may have torn the channel down already
    }
    advance(v == Verdict::accepted ? ZkStatus::accepted : ZkStatus::rejected);
}

// ---------------------------------------------------------------------------
// Range-proof orchestration

namespace {

void check_single_output(const Circuit& c) {
    size_t n = 0;
    for (const OutputGroup& g : c.outputs) n += g.count;
    if (n != 1) throw ConfigError("the range proof needs a single-bit verdict circuit");
}

std::vector<uint8_t> init_payload(const Circuit& circ, FpParams p, const Bounds& bounds) {
    Writer w;
    Digest32 dg = circuit_digest(circ);
    w.bytes(dg);
    w.u16(static_cast<uint16_t>(p.k));
    w.u16(static_cast<uint16_t>(p.f));
    w.bits(range_public_bits(bounds));
    return w.take();
}

}  // namespace

Verdict prove_range(const Circuit& circ, const Vec3& loc, const Bounds& bounds,
                    Channel& ch, uint64_t sid, ZkTripleSource* src,
                    const ZkOptions& opt) {
    check_single_output(circ);
    CompiledCircuit cc = CompiledCircuit::compile(circ);
    ZkProverCtx prover(cc, ch, sid);

    Frame init = ch.expect(msg::ZK_INIT);
    if (init.payload != init_payload(circ, loc.params(), bounds)) {
        try {
            ch.send_error(sid, errcode::CFG_MISMATCH, "range proof setup mismatch");
        } catch (const Error&) {
        }
        throw ConfigError("range proof setup differs from the verifier's");
    }
    prover.absorb_external(msg::ZK_INIT, init.payload);

    prover.commit(range_witness_bits(loc), range_public_bits(bounds));
    prover.triples(src, opt.verifier_dealer);
    prover.evaluate();
    prover.open_outputs();
    return prover.verdict(opt.interactive_coin);
}

Verdict verify_range(const Circuit& circ, const Bounds& bounds, const GF128& delta,
                     Channel& ch, uint64_t sid, ZkTripleSource* src, Rng& rng,
                     const ZkOptions& opt) {
    check_single_output(circ);
    CompiledCircuit cc = CompiledCircuit::compile(circ);
    ZkVerifierCtx verifier(cc, ch, sid, delta);

    auto payload = init_payload(circ, bounds.params(), bounds);
    ch.send(Frame{msg::ZK_INIT, sid, payload});
    verifier.absorb_external(msg::ZK_INIT, payload);

    verifier.commit(range_public_bits(bounds), rng);
    verifier.triples(src, opt.verifier_dealer, rng);
    verifier.evaluate();
    auto out = verifier.receive_outputs();
    bool ok = verifier.finalize(rng, opt.interactive_coin);
    Verdict v = !ok                ? Verdict::rejected_cheat
                : (out[0] & 1) == 1 ? Verdict::accepted
                                    : Verdict::rejected_out_of_bounds;
    verifier.send_verdict(v);
    return v;
}

}  // namespace skyveil
