#ifndef SKYVEIL_ZKRANGE_HPP
#define SKYVEIL_ZKRANGE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "skyveil/channel.hpp"
#include "skyveil/circuit.hpp"
#include "skyveil/fixedpoint.hpp"
#include "skyveil/gf128.hpp"
#include "skyveil/hashing.hpp"
#include "skyveil/rng.hpp"
#include "skyveil/smpc.hpp"

namespace skyveil {

// Designated-verifier interactive proof that a hidden witness satisfies a
// Boolean circuit, built from IT-MAC-authenticated bits: the verifier holds a
// global key delta (never transmitted, fresh per session) and one key per
// wire; the prover holds the wire bit and a tag m = k xor bit*delta. Witness
// bits are committed through correlated OT, linear gates are free, each AND
// consumes one preprocessed triple and opens two masked bits, and every
// opening is verified in one batched GF(2^128) linear combination with
// transcript-derived coefficients before the verdict.

enum class Verdict : uint8_t {
    accepted = 0,
    rejected_out_of_bounds = 1,
    rejected_cheat = 2,
};
const char* verdict_name(Verdict v);

// Session progress; advances monotonically.
enum class ZkStatus : uint8_t { setup = 0, committed, checked, accepted, rejected };

struct ZkOptions {
    // Derive the batch-check coefficients from a joint coin the verifier
    // reveals after all openings are fixed, instead of from the transcript
    // hash alone.
    bool interactive_coin = false;
    // The verifier manufactures the multiplication triples itself and ships
    // the prover views in the ZK_TRIPLES frame. The verifier then knows every
    // triple plaintext, so the masked openings leak the witness: this mode is
    // NOT zero-knowledge and exists only for dealer-less tests.
    bool verifier_dealer = false;
};

// Digest of the canonical circuit text; both sides pin it in ZK_INIT.
Digest32 circuit_digest(const Circuit& c);

// Input-bit packing for the range-check circuit (k bits per component, raw
// two's complement, LSB first, declaration order).
std::vector<uint8_t> range_witness_bits(const Vec3& loc);
std::vector<uint8_t> range_public_bits(const Bounds& bounds);

// Gate-level prover half. Drives one side of the proof over a channel; the
// orchestrators below run the whole protocol, tests can also call the phases
// directly. Witness groups are the circuit inputs with the Witness role;
// every other input group is public and must be known to both sides.
class ZkProverCtx {
public:
    ZkProverCtx(const CompiledCircuit& cc, Channel& ch, uint64_t sid);

    // Binds an out-of-band frame (ZK_INIT) into the transcript.
    void absorb_external(uint8_t type, std::span<const uint8_t> payload);

    // ZK_COT header, then one correlated OT per witness bit.
    void commit(std::span<const uint8_t> witness_bits,
                std::span<const uint8_t> public_bits);
    // Triple hand-off; see ZkOptions::verifier_dealer. `src` may be null in
    // verifier-dealer mode.
    void triples(ZkTripleSource* src, bool verifier_dealer);
    void evaluate();                      // one ZK_OPEN_BATCH per AND layer
    std::vector<uint8_t> open_outputs();  // ZK_FINAL: output bits with tags
    Verdict verdict(bool interactive_coin);

    ZkStatus status() const { return status_; }
    const std::vector<uint8_t>& bits() const { return x_; }
    const std::vector<GF128>& macs() const { return m_; }
    uint64_t triples_used() const { return used_; }

private:
    void advance(ZkStatus s);
    void absorb(uint8_t type, std::span<const uint8_t> payload);
    void xor_public(uint32_t wire, uint8_t c);
    void eval_linear(const Gate& g);

    const CompiledCircuit& cc_;
    const Circuit& c_;
    Channel& ch_;
    uint64_t sid_;
    std::vector<uint8_t> x_;
    std::vector<GF128> m_;
    std::vector<ZkTripleProver> pool_;
    size_t cursor_ = 0;
    uint64_t used_ = 0;
    Transcript transcript_{"zk-range-proof"};
    ZkStatus status_ = ZkStatus::setup;
};

// Gate-level verifier half; holds the global key and one key per wire,
// records every opening, and settles them in finalize().
class ZkVerifierCtx {
public:
    ZkVerifierCtx(const CompiledCircuit& cc, Channel& ch, uint64_t sid,
                  const GF128& delta);

    void absorb_external(uint8_t type, std::span<const uint8_t> payload);

    void commit(std::span<const uint8_t> public_bits, Rng& rng);
    void triples(ZkTripleSource* src, bool verifier_dealer, Rng& rng);
    void evaluate();
    // Receives ZK_FINAL; the claimed output bits join the deferred checks.
    std::vector<uint8_t> receive_outputs();
    // Batched MAC verification of every recorded opening. Emits ZK_COIN
    // first when the interactive coin is enabled. False means cheat.
    bool finalize(Rng& rng, bool interactive_coin);
    void send_verdict(Verdict v);

    ZkStatus status() const { return status_; }
    const std::vector<GF128>& keys() const { return k_; }
    const std::vector<uint8_t>& opened_values() const { return opened_; }
    uint64_t triples_used() const { return used_; }

private:
    struct OpenRec {
        uint8_t bit;
        GF128 tag, key;
    };

    void advance(ZkStatus s);
    void absorb(uint8_t type, std::span<const uint8_t> payload);
    void xor_public(uint32_t wire, uint8_t c);
    void eval_linear(const Gate& g);

    const CompiledCircuit& cc_;
    const Circuit& c_;
    Channel& ch_;
    uint64_t sid_;
    GF128 delta_;
    std::vector<GF128> k_;
    std::vector<ZkTripleVerifier> pool_;
    size_t cursor_ = 0;
    uint64_t used_ = 0;
    std::vector<OpenRec> opens_;
    std::vector<uint8_t> opened_;
    Transcript transcript_{"zk-range-proof"};
    ZkStatus status_ = ZkStatus::setup;
};

// Full protocol over the range-check circuit. The verifier issues ZK_INIT
// (circuit digest, fixed-point parameters, bounds); the prover checks it
// against its own copies and aborts on mismatch. `delta` must be fresh for
// the session and, in dealer mode, registered with the dealer that backs
// `src`. Both calls return the same verdict.
Verdict prove_range(const Circuit& circ, const Vec3& loc, const Bounds& bounds,
                    Channel& ch, uint64_t sid, ZkTripleSource* src,
                    const ZkOptions& opt = {});
Verdict verify_range(const Circuit& circ, const Bounds& bounds, const GF128& delta,
                     Channel& ch, uint64_t sid, ZkTripleSource* src, Rng& rng,
                     const ZkOptions& opt = {});

}  // namespace skyveil

#endif
