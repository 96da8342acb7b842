#ifndef SKYVEIL_SMPC_HPP
#define SKYVEIL_SMPC_HPP

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "skyveil/channel.hpp"
#include "skyveil/circuit.hpp"
#include "skyveil/gf128.hpp"
#include "skyveil/hashing.hpp"
#include "skyveil/rng.hpp"

namespace skyveil {

enum class EngineMode : uint8_t { semi_honest = 0, malicious = 1 };

// One party's share of a multiplication triple c = a AND b.
struct BitTriple {
    uint8_t a = 0, b = 0, c = 0;
};

// One party's authenticated share: the tag commits this party's bit under
// the peer's global key, the key authenticates the peer's bit under ours.
struct AuthShare {
    uint8_t bit = 0;
    GF128 tag = GF128::zero();
    GF128 key = GF128::zero();
};

struct AuthTriple {
    AuthShare a, b, c;
};

// Preprocessing views for the range-proof protocol: the prover holds
// authenticated bits, the verifier only the matching keys, all under the
// verifier's global key.
struct ZkTripleProver {
    uint8_t xa = 0, xb = 0, xc = 0;
    GF128 ma, mb, mc;
};
struct ZkTripleVerifier {
    GF128 ka, kb, kc;
};

enum class MaterialKind : uint8_t {
    semi_triple = 0,
    auth_triple = 1,
    auth_bit = 2,
    zk_triple = 3,
};

// Correlated-randomness supplier for one party of one session. Requests by
// the two parties must arrive in the same order with the same counts so the
// views line up.
class TripleSource {
public:
    virtual ~TripleSource() = default;
    virtual std::vector<BitTriple> semi_triples(size_t n) = 0;
    virtual std::vector<AuthTriple> auth_triples(size_t n) = 0;
    virtual std::vector<AuthShare> auth_bits(size_t n) = 0;
};

class ZkTripleSource {
public:
    virtual ~ZkTripleSource() = default;
    virtual std::vector<ZkTripleProver> zk_prover_triples(size_t n) = 0;
    virtual std::vector<ZkTripleVerifier> zk_verifier_triples(size_t n) = 0;
};

// Shared generator behind a semi-trusted dealer: knows all correlated
// randomness (and both global keys) but never sees inputs or wire values.
// Thread-safe; both parties' cursors advance independently over the same
// underlying records.
class DealerState : public TripleSource, public ZkTripleSource {
public:
    explicit DealerState(Rng rng);

    void set_delta(int party, const GF128& delta);
    void set_zk_delta(const GF128& delta);
    bool has_deltas() const;
    bool has_zk_delta() const;

    std::vector<BitTriple> take_semi(int party, size_t n);
    std::vector<AuthTriple> take_auth(int party, size_t n);
    std::vector<AuthShare> take_auth_bits(int party, size_t n);
    std::vector<ZkTripleProver> take_zk_prover(size_t n);
    std::vector<ZkTripleVerifier> take_zk_verifier(size_t n);

    // TripleSource/ZkTripleSource for in-process use, bound to a party via
    // facade() below; these serve party 0.
    std::vector<BitTriple> semi_triples(size_t n) override { return take_semi(0, n); }
    std::vector<AuthTriple> auth_triples(size_t n) override { return take_auth(0, n); }
    std::vector<AuthShare> auth_bits(size_t n) override { return take_auth_bits(0, n); }
    std::vector<ZkTripleProver> zk_prover_triples(size_t n) override {
        return take_zk_prover(n);
    }
    std::vector<ZkTripleVerifier> zk_verifier_triples(size_t n) override {
        return take_zk_verifier(n);
    }

private:
    struct FullAuth {
        AuthShare side[2];
    };
    struct FullZk {
        ZkTripleProver p;
        ZkTripleVerifier v;
    };
    FullAuth make_auth_bit(uint8_t b0, uint8_t b1);

    mutable std::mutex mu_;
    Rng rng_;
    GF128 delta_[2]{};
    GF128 zk_delta_{};
    bool have_delta_[2] = {false, false};
    bool have_zk_ = false;
    std::vector<BitTriple> semi_[2];
    size_t semi_cursor_[2] = {0, 0};
    std::vector<FullAuth> auth_triples_abc_;  // 3 entries per triple: a,b,c
    size_t auth_cursor_[2] = {0, 0};
    std::vector<FullAuth> auth_bits_;
    size_t bit_cursor_[2] = {0, 0};
    std::vector<FullZk> zk_;
    size_t zk_cursor_[2] = {0, 0};
};

// Per-party facade over a shared in-process DealerState.
class LocalDealerSource : public TripleSource, public ZkTripleSource {
public:
    LocalDealerSource(std::shared_ptr<DealerState> state, int party)
        : st_(std::move(state)), party_(party) {}
    std::vector<BitTriple> semi_triples(size_t n) override { return st_->take_semi(party_, n); }
    std::vector<AuthTriple> auth_triples(size_t n) override { return st_->take_auth(party_, n); }
    std::vector<AuthShare> auth_bits(size_t n) override { return st_->take_auth_bits(party_, n); }
    std::vector<ZkTripleProver> zk_prover_triples(size_t n) override {
        return st_->take_zk_prover(n);
    }
    std::vector<ZkTripleVerifier> zk_verifier_triples(size_t n) override {
        return st_->take_zk_verifier(n);
    }

private:
    std::shared_ptr<DealerState> st_;
    int party_;
};

// Networked client for a dealer node: TRIPLE_REQ out, TRIPLE_BLOCK back.
class DealerClient : public TripleSource, public ZkTripleSource {
public:
    // view: party index for 2PC material; 0 = prover / 1 = verifier for zk.
    DealerClient(Channel& ch, uint64_t session_id, int view)
        : ch_(ch), sid_(session_id), view_(view) {}
    std::vector<BitTriple> semi_triples(size_t n) override;
    std::vector<AuthTriple> auth_triples(size_t n) override;
    std::vector<AuthShare> auth_bits(size_t n) override;
    std::vector<ZkTripleProver> zk_prover_triples(size_t n) override;
    std::vector<ZkTripleVerifier> zk_verifier_triples(size_t n) override;

private:
    std::vector<uint8_t> request(MaterialKind kind, int view, size_t n);
    Channel& ch_;
    uint64_t sid_;
    int view_;
};

// Dealer-node helper: serve one TRIPLE_REQ payload from shared state and
// return the TRIPLE_BLOCK payload for the requesting view.
std::vector<uint8_t> serve_dealer_request(DealerState& st, std::span<const uint8_t> req);

// Buffered source: filled ahead of a round (with slack), drained by the
// engine. Throws on exhaustion rather than blocking.
class PoolSource : public TripleSource {
public:
    void add_semi(std::vector<BitTriple> v);
    void add_auth(std::vector<AuthTriple> v);
    void add_auth_bits(std::vector<AuthShare> v);
    size_t semi_available() const { return semi_.size() - semi_at_; }
    size_t auth_available() const { return auth_.size() - auth_at_; }
    size_t auth_bits_available() const { return bits_.size() - bits_at_; }
    std::vector<BitTriple> semi_triples(size_t n) override;
    std::vector<AuthTriple> auth_triples(size_t n) override;
    std::vector<AuthShare> auth_bits(size_t n) override;

private:
    std::vector<BitTriple> semi_;
    std::vector<AuthTriple> auth_;
    std::vector<AuthShare> bits_;
    size_t semi_at_ = 0, auth_at_ = 0, bits_at_ = 0;
};

// Wire encodings for TRIPLE_REQ / TRIPLE_BLOCK payloads.
namespace dealer_wire {
std::vector<uint8_t> encode_request(MaterialKind kind, int view, uint32_t count);
void decode_request(std::span<const uint8_t> payload, MaterialKind& kind, int& view,
                    uint32_t& count);
std::vector<uint8_t> encode_semi(std::span<const BitTriple> v);
std::vector<BitTriple> decode_semi(std::span<const uint8_t> payload);
std::vector<uint8_t> encode_auth(std::span<const AuthTriple> v);
std::vector<AuthTriple> decode_auth(std::span<const uint8_t> payload);
std::vector<uint8_t> encode_auth_bits(std::span<const AuthShare> v);
std::vector<AuthShare> decode_auth_bits(std::span<const uint8_t> payload);
std::vector<uint8_t> encode_zk_prover(std::span<const ZkTripleProver> v);
std::vector<ZkTripleProver> decode_zk_prover(std::span<const uint8_t> payload);
std::vector<uint8_t> encode_zk_verifier(std::span<const ZkTripleVerifier> v);
std::vector<ZkTripleVerifier> decode_zk_verifier(std::span<const uint8_t> payload);
}  // namespace dealer_wire

// Dealer-free semi-honest triple generation between the two parties: each
// samples a and b locally, the two cross terms come from one batched OT per
// direction (sender masks with r, offers r and r xor a; the receiver selects
// with its b). Both parties call this concurrently.
std::vector<BitTriple> gen_triples_ot(Channel& ch, uint64_t session_id, int party,
                                      size_t count, Rng& rng);

// Two-party evaluation of a compiled circuit over XOR shares (GMW style).
// Linear gates are local; each AND consumes one triple and opens two masked
// bits, batched per AND layer. In malicious mode every share is carried as
// an authenticated share, openings travel with their tags, and a batched
// MAC check over all recorded openings gates the output reveal.
class Engine {
public:
    Engine(const CompiledCircuit& cc, EngineMode mode, int party, uint64_t session_id,
           Channel& ch, TripleSource& src, Rng& rng, GF128 my_delta = GF128::zero());

    // True if `party` supplies the plaintext for a group with this role.
    // Party 0 also feeds Public groups; Witness groups belong to party 1.
    static bool owns_input(int party, InputRole role);

    // `my_bits` concatenates the plaintext bits of every group this party
    // owns, in declaration order.
    void share_inputs(std::span<const uint8_t> my_bits);
    void evaluate();
    // Opens the output wires toward `receiver` only; returns the plaintext
    // bits there and an empty vector on the other side. In malicious mode
    // the deferred opening check runs first and output tags are verified
    // bit by bit.
    std::vector<uint8_t> reveal_to(int receiver);

    uint64_t triples_used() const { return triples_used_; }
    // Plaintext d,e stream from AND openings (used by distribution tests).
    const std::vector<uint8_t>& opened_values() const { return opened_values_; }

private:
    struct OpenRec {
        uint8_t bit;
        GF128 tag, key;
    };
    struct Prep {
        uint32_t out, x, y;
        size_t t;
    };

    void set_const_one();
    void xor_public(uint32_t wire, uint8_t c);
    void eval_linear(const Gate& g);
    size_t take_triple();
    Frame exchange(uint8_t type, std::vector<uint8_t> payload);
    void absorb(int sender, uint8_t type, std::span<const uint8_t> payload);

    const CompiledCircuit& cc_;
    const Circuit& c_;
    EngineMode mode_;
    int party_;
    uint64_t sid_;
    Channel& ch_;
    TripleSource& src_;
    Rng& rng_;
    GF128 delta_;

    std::vector<uint8_t> bits_;
    std::vector<GF128> tags_, keys_;  // malicious mode only
    std::vector<BitTriple> semi_pool_;
    std::vector<AuthTriple> auth_pool_;
    std::vector<uint8_t> pool_used_;
    size_t pool_cursor_ = 0;
    uint64_t triples_used_ = 0;
    std::vector<OpenRec> recv_opens_;
    Transcript transcript_{"smpc-openings"};
    std::vector<uint8_t> opened_values_;
    bool inputs_done_ = false;
    bool eval_done_ = false;
};

}  // namespace skyveil

#endif
