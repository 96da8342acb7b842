#include "skyveil/smpc.hpp"

#include "skyveil/errors.hpp"
#include "skyveil/messages.hpp"
#include "skyveil/ot.hpp"
#include "skyveil/wire.hpp"

namespace skyveil {

// ---------------------------------------------------------------------------
// DealerState

DealerState::DealerState(Rng rng) : rng_(std::move(rng)) {}

void DealerState::set_delta(int party, const GF128& delta) {
    std::lock_guard<std::mutex> lk(mu_);
    delta_[party & 1] = delta;
    have_delta_[party & 1] = true;
}

void DealerState::set_zk_delta(const GF128& delta) {
    std::lock_guard<std::mutex> lk(mu_);
    zk_delta_ = delta;
    have_zk_ = true;
}

bool DealerState::has_deltas() const {
    std::lock_guard<std::mutex> lk(mu_);
    return have_delta_[0] && have_delta_[1];
}

bool DealerState::has_zk_delta() const {
    std::lock_guard<std::mutex> lk(mu_);
    return have_zk_;
}

// Authenticated share pair for plain shares (b0, b1): each side's tag lives
// under the other side's global key.
DealerState::FullAuth DealerState::make_auth_bit(uint8_t b0, uint8_t b1) {
    GF128 k0 = GF128::random(rng_);  // party 0's key for party 1's bit
    GF128 k1 = GF128::random(rng_);  // party 1's key for party 0's bit
    FullAuth f;
    f.side[0] = AuthShare{b0, k1 ^ delta_[1].masked(b0), k0};
    f.side[1] = AuthShare{b1, k0 ^ delta_[0].masked(b1), k1};
    return f;
}

std::vector<BitTriple> DealerState::take_semi(int party, size_t n) {
    std::lock_guard<std::mutex> lk(mu_);
    party &= 1;
    size_t& cur = semi_cursor_[party];
    while (semi_[party].size() < cur + n) {
        uint8_t a = rng_.bit(), b = rng_.bit();
        uint8_t c = a & b;
        BitTriple t0{rng_.bit(), rng_.bit(), rng_.bit()};
        BitTriple t1{static_cast<uint8_t>(a ^ t0.a), static_cast<uint8_t>(b ^ t0.b),
                     static_cast<uint8_t>(c ^ t0.c)};
        semi_[0].push_back(t0);
        semi_[1].push_back(t1);
    }
    std::vector<BitTriple> out(semi_[party].begin() + static_cast<ptrdiff_t>(cur),
                               semi_[party].begin() + static_cast<ptrdiff_t>(cur + n));
    cur += n;
    return out;
}

std::vector<AuthTriple> DealerState::take_auth(int party, size_t n) {
    std::lock_guard<std::mutex> lk(mu_);
    if (!have_delta_[0] || !have_delta_[1])
        throw ConfigError("authenticated triples need both global keys registered");
    party &= 1;
    size_t& cur = auth_cursor_[party];
    while (auth_triples_abc_.size() < (cur + n) * 3) {
        uint8_t a = rng_.bit(), b = rng_.bit();
        uint8_t c = a & b;
        uint8_t a0 = rng_.bit(), b0 = rng_.bit(), c0 = rng_.bit();
        auth_triples_abc_.push_back(make_auth_bit(a0, a ^ a0));
        auth_triples_abc_.push_back(make_auth_bit(b0, b ^ b0));
        auth_triples_abc_.push_back(make_auth_bit(c0, c ^ c0));
    }
    std::vector<AuthTriple> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i].a = auth_triples_abc_[(cur + i) * 3 + 0].side[party];
        out[i].b = auth_triples_abc_[(cur + i) * 3 + 1].side[party];
        out[i].c = auth_triples_abc_[(cur + i) * 3 + 2].side[party];
    }
    cur += n;
    return out;
}

std::vector<AuthShare> DealerState::take_auth_bits(int party, size_t n) {
    std::lock_guard<std::mutex> lk(mu_);
    if (!have_delta_[0] || !have_delta_[1])
        throw ConfigError("authenticated bits need both global keys registered");
    party &= 1;
    size_t& cur = bit_cursor_[party];
    while (auth_bits_.size() < cur + n) {
        uint8_t r0 = rng_.bit(), r1 = rng_.bit();
        auth_bits_.push_back(make_auth_bit(r0, r1));
    }
    std::vector<AuthShare> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = auth_bits_[cur + i].side[party];
    cur += n;
    return out;
}

std::vector<ZkTripleProver> DealerState::take_zk_prover(size_t n) {
    std::lock_guard<std::mutex> lk(mu_);
    if (!have_zk_) throw ConfigError("zk triples need the verifier key registered");
    size_t& cur = zk_cursor_[0];
    while (zk_.size() < cur + n) {
        FullZk z;
        z.p.xa = rng_.bit();
        z.p.xb = rng_.bit();
        z.p.xc = z.p.xa & z.p.xb;
        z.v.ka = GF128::random(rng_);
        z.v.kb = GF128::random(rng_);
        z.v.kc = GF128::random(rng_);
        z.p.ma = z.v.ka ^ zk_delta_.masked(z.p.xa);
        z.p.mb = z.v.kb ^ zk_delta_.masked(z.p.xb);
        z.p.mc = z.v.kc ^ zk_delta_.masked(z.p.xc);
        zk_.push_back(z);
    }
    std::vector<ZkTripleProver> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = zk_[cur + i].p;
    cur += n;
    return out;
}

std::vector<ZkTripleVerifier> DealerState::take_zk_verifier(size_t n) {
    std::lock_guard<std::mutex> lk(mu_);
    if (!have_zk_) throw ConfigError("zk triples need the verifier key registered");
    size_t& cur = zk_cursor_[1];
    while (zk_.size() < cur + n) {
        // Same generation path as the prover view; reuse it by unlocking is
        // not worth the dance — duplicate the small body instead.
        FullZk z;
        z.p.xa = rng_.bit();
        z.p.xb = rng_.bit();
        z.p.xc = z.p.xa & z.p.xb;
        z.v.ka = GF128::random(rng_);
        z.v.kb = GF128::random(rng_);
        z.v.kc = GF128::random(rng_);
        z.p.ma = z.v.ka ^ zk_delta_.masked(z.p.xa);
        z.p.mb = z.v.kb ^ zk_delta_.masked(z.p.xb);
        z.p.mc = z.v.kc ^ zk_delta_.masked(z.p.xc);
        zk_.push_back(z);
    }
    std::vector<ZkTripleVerifier> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = zk_[cur + i].v;
    cur += n;
    return out;
}

// ---------------------------------------------------------------------------
// Wire encodings

namespace dealer_wire {

namespace {
constexpr size_t kMaxCount = 1u << 22;

void check_count(size_t n) {
    if (n > kMaxCount) throw ProtocolError("preprocessing request too large");
}
}  // namespace

std::vector<uint8_t> encode_request(MaterialKind kind, int view, uint32_t count) {
    Writer w;
    w.u8(static_cast<uint8_t>(kind));
    w.u8(static_cast<uint8_t>(view & 1));
    w.u32(count);
    return w.take();
}

void decode_request(std::span<const uint8_t> payload, MaterialKind& kind, int& view,
                    uint32_t& count) {
    Reader r(payload);
    uint8_t k = r.u8();
    if (k > static_cast<uint8_t>(MaterialKind::zk_triple))
        throw ProtocolError("unknown preprocessing kind");
    kind = static_cast<MaterialKind>(k);
    view = r.u8() & 1;
    count = r.u32();
    r.expect_end();
    check_count(count);
}

namespace {
void put_header(Writer& w, MaterialKind kind, size_t n) {
    check_count(n);
    w.u8(static_cast<uint8_t>(kind));
    w.u32(static_cast<uint32_t>(n));
}

uint32_t get_header(Reader& r, MaterialKind kind) {
    if (r.u8() != static_cast<uint8_t>(kind)) throw ProtocolError("preprocessing kind mismatch");
    uint32_t n = r.u32();
    check_count(n);
    return n;
}
}  // namespace

std::vector<uint8_t> encode_semi(std::span<const BitTriple> v) {
    Writer w;
    put_header(w, MaterialKind::semi_triple, v.size());
    std::vector<uint8_t> a(v.size()), b(v.size()), c(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        a[i] = v[i].a;
        b[i] = v[i].b;
        c[i] = v[i].c;
    }
    w.bits(a);
    w.bits(b);
    w.bits(c);
    return w.take();
}

std::vector<BitTriple> decode_semi(std::span<const uint8_t> payload) {
    Reader r(payload);
    uint32_t n = get_header(r, MaterialKind::semi_triple);
    auto a = r.bits(), b = r.bits(), c = r.bits();
    if (a.size() != n || b.size() != n || c.size() != n)
        throw ProtocolError("triple block arity mismatch");
    r.expect_end();
    std::vector<BitTriple> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = BitTriple{a[i], b[i], c[i]};
    return out;
}

std::vector<uint8_t> encode_auth(std::span<const AuthTriple> v) {
    Writer w;
    put_header(w, MaterialKind::auth_triple, v.size());
    std::vector<uint8_t> a(v.size()), b(v.size()), c(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        a[i] = v[i].a.bit;
        b[i] = v[i].b.bit;
        c[i] = v[i].c.bit;
    }
    w.bits(a);
    w.bits(b);
    w.bits(c);
    for (const AuthTriple& t : v) {
        w.gf(t.a.tag);
        w.gf(t.b.tag);
        w.gf(t.c.tag);
        w.gf(t.a.key);
        w.gf(t.b.key);
        w.gf(t.c.key);
    }
    return w.take();
}

std::vector<AuthTriple> decode_auth(std::span<const uint8_t> payload) {
    Reader r(payload);
    uint32_t n = get_header(r, MaterialKind::auth_triple);
    auto a = r.bits(), b = r.bits(), c = r.bits();
    if (a.size() != n || b.size() != n || c.size() != n)
        throw ProtocolError("triple block arity mismatch");
    std::vector<AuthTriple> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i].a.bit = a[i];
        out[i].b.bit = b[i];
        out[i].c.bit = c[i];
        out[i].a.tag = r.gf();
        out[i].b.tag = r.gf();
        out[i].c.tag = r.gf();
        out[i].a.key = r.gf();
        out[i].b.key = r.gf();
        out[i].c.key = r.gf();
    }
    r.expect_end();
    return out;
}

std::vector<uint8_t> encode_auth_bits(std::span<const AuthShare> v) {
    Writer w;
    put_header(w, MaterialKind::auth_bit, v.size());
    std::vector<uint8_t> b(v.size());
    for (size_t i = 0; i < v.size(); ++i) b[i] = v[i].bit;
    w.bits(b);
    for (const AuthShare& s : v) {
        w.gf(s.tag);
        w.gf(s.key);
    }
    return w.take();
}

std::vector<AuthShare> decode_auth_bits(std::span<const uint8_t> payload) {
    Reader r(payload);
    uint32_t n = get_header(r, MaterialKind::auth_bit);
    auto b = r.bits();
    if (b.size() != n) throw ProtocolError("auth bit block arity mismatch");
    std::vector<AuthShare> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i].bit = b[i];
        out[i].tag = r.gf();
        out[i].key = r.gf();
    }
    r.expect_end();
    return out;
}

std::vector<uint8_t> encode_zk_prover(std::span<const ZkTripleProver> v) {
    Writer w;
    put_header(w, MaterialKind::zk_triple, v.size());
    std::vector<uint8_t> a(v.size()), b(v.size()), c(v.size());
    for (size_t i = 0; i < v.size(); ++i) {
        a[i] = v[i].xa;
        b[i] = v[i].xb;
        c[i] = v[i].xc;
    }
    w.bits(a);
    w.bits(b);
    w.bits(c);
    for (const ZkTripleProver& t : v) {
        w.gf(t.ma);
        w.gf(t.mb);
        w.gf(t.mc);
    }
    return w.take();
}

std::vector<ZkTripleProver> decode_zk_prover(std::span<const uint8_t> payload) {
    Reader r(payload);
    uint32_t n = get_header(r, MaterialKind::zk_triple);
    auto a = r.bits(), b = r.bits(), c = r.bits();
    if (a.size() != n || b.size() != n || c.size() != n)
        throw ProtocolError("zk triple block arity mismatch");
    std::vector<ZkTripleProver> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i].xa = a[i];
        out[i].xb = b[i];
        out[i].xc = c[i];
        out[i].ma = r.gf();
        out[i].mb = r.gf();
        out[i].mc = r.gf();
    }
    r.expect_end();
    return out;
}

std::vector<uint8_t> encode_zk_verifier(std::span<const ZkTripleVerifier> v) {
    Writer w;
    put_header(w, MaterialKind::zk_triple, v.size());
    for (const ZkTripleVerifier& t : v) {
        w.gf(t.ka);
        w.gf(t.kb);
        w.gf(t.kc);
    }
    return w.take();
}

std::vector<ZkTripleVerifier> decode_zk_verifier(std::span<const uint8_t> payload) {
    Reader r(payload);
    uint32_t n = get_header(r, MaterialKind::zk_triple);
    std::vector<ZkTripleVerifier> out(n);
    for (size_t i = 0; i < n; ++i) {
        out[i].ka = r.gf();
        out[i].kb = r.gf();
        out[i].kc = r.gf();
    }
    r.expect_end();
    return out;
}

}  // namespace dealer_wire

std::vector<uint8_t> serve_dealer_request(DealerState& st, std::span<const uint8_t> req) {
    MaterialKind kind;
    int view;
    uint32_t count;
    dealer_wire::decode_request(req, kind, view, count);
    switch (kind) {
        case MaterialKind::semi_triple: {
            auto v = st.take_semi(view, count);
            return dealer_wire::encode_semi(v);
        }
        case MaterialKind::auth_triple: {
            auto v = st.take_auth(view, count);
            return dealer_wire::encode_auth(v);
        }
        case MaterialKind::auth_bit: {
            auto v = st.take_auth_bits(view, count);
            return dealer_wire::encode_auth_bits(v);
        }
        case MaterialKind::zk_triple: {
            if (view == 0) {
                auto v = st.take_zk_prover(count);
                return dealer_wire::encode_zk_prover(v);
            }
            auto v = st.take_zk_verifier(count);
            return dealer_wire::encode_zk_verifier(v);
        }
    }
    throw ProtocolError("unknown preprocessing kind");
}

// ---------------------------------------------------------------------------
// DealerClient

std::vector<uint8_t> DealerClient::request(MaterialKind kind, int view, size_t n) {
    if (n > (1u << 22)) throw Error("preprocessing request too large");
    ch_.send(Frame{msg::TRIPLE_REQ, sid_,
                   dealer_wire::encode_request(kind, view, static_cast<uint32_t>(n))});
    return ch_.expect(msg::TRIPLE_BLOCK).payload;
}

std::vector<BitTriple> DealerClient::semi_triples(size_t n) {
    return dealer_wire::decode_semi(request(MaterialKind::semi_triple, view_, n));
}
std::vector<AuthTriple> DealerClient::auth_triples(size_t n) {
    return dealer_wire::decode_auth(request(MaterialKind::auth_triple, view_, n));
}
std::vector<AuthShare> DealerClient::auth_bits(size_t n) {
    return dealer_wire::decode_auth_bits(request(MaterialKind::auth_bit, view_, n));
}
std::vector<ZkTripleProver> DealerClient::zk_prover_triples(size_t n) {
    return dealer_wire::decode_zk_prover(request(MaterialKind::zk_triple, 0, n));
}
std::vector<ZkTripleVerifier> DealerClient::zk_verifier_triples(size_t n) {
    return dealer_wire::decode_zk_verifier(request(MaterialKind::zk_triple, 1, n));
}

// ---------------------------------------------------------------------------
// PoolSource

void PoolSource::add_semi(std::vector<BitTriple> v) {
    semi_.insert(semi_.end(), v.begin(), v.end());
}
void PoolSource::add_auth(std::vector<AuthTriple> v) {
    auth_.insert(auth_.end(), v.begin(), v.end());
}
void PoolSource::add_auth_bits(std::vector<AuthShare> v) {
    bits_.insert(bits_.end(), v.begin(), v.end());
}

std::vector<BitTriple> PoolSource::semi_triples(size_t n) {
    if (semi_available() < n) throw Error("triple pool exhausted");
    std::vector<BitTriple> out(semi_.begin() + static_cast<ptrdiff_t>(semi_at_),
                               semi_.begin() + static_cast<ptrdiff_t>(semi_at_ + n));
    semi_at_ += n;
    return out;
}
std::vector<AuthTriple> PoolSource::auth_triples(size_t n) {
    if (auth_available() < n) throw Error("triple pool exhausted");
    std::vector<AuthTriple> out(auth_.begin() + static_cast<ptrdiff_t>(auth_at_),
                                auth_.begin() + static_cast<ptrdiff_t>(auth_at_ + n));
    auth_at_ += n;
    return out;
}
std::vector<AuthShare> PoolSource::auth_bits(size_t n) {
    if (auth_bits_available() < n) throw Error("triple pool exhausted");
    std::vector<AuthShare> out(bits_.begin() + static_cast<ptrdiff_t>(bits_at_),
                               bits_.begin() + static_cast<ptrdiff_t>(bits_at_ + n));
    bits_at_ += n;
    return out;
}

// ---------------------------------------------------------------------------
// OT-based semi-honest triples

std::vector<BitTriple> gen_triples_ot(Channel& ch, uint64_t session_id, int party,
                                      size_t count, Rng& rng) {
    if (count == 0) return {};
    std::vector<uint8_t> a(count), b(count), r(count);
    for (size_t i = 0; i < count; ++i) {
        a[i] = rng.bit();
        b[i] = rng.bit();
        r[i] = rng.bit();
    }
    // As sender I offer (r, r xor a); as receiver I select with my b and the
    // returned byte is my share of the peer's a times my b.
    std::vector<OtPair> pairs(count);
    for (size_t i = 0; i < count; ++i) {
        pairs[i].m0 = {r[i]};
        pairs[i].m1 = {static_cast<uint8_t>(r[i] ^ a[i])};
    }
    std::vector<std::vector<uint8_t>> got;
    if (party == 0) {
        ot_send(ch, session_id, pairs);
        got = ot_recv(ch, session_id, b);
    } else {
        got = ot_recv(ch, session_id, b);
        ot_send(ch, session_id, pairs);
    }
    std::vector<BitTriple> out(count);
    for (size_t i = 0; i < count; ++i) {
        if (got[i].size() != 1) throw ProtocolError("triple OT message length");
        uint8_t cross = static_cast<uint8_t>(got[i][0] & 1);
        out[i].a = a[i];
        out[i].b = b[i];
        out[i].c = static_cast<uint8_t>((a[i] & b[i]) ^ r[i] ^ cross);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(const CompiledCircuit& cc, EngineMode mode, int party, uint64_t session_id,
               Channel& ch, TripleSource& src, Rng& rng, GF128 my_delta)
    : cc_(cc),
      c_(*cc.circuit),
      mode_(mode),
      party_(party & 1),
      sid_(session_id),
      ch_(ch),
      src_(src),
      rng_(rng),
      delta_(my_delta) {
    if (mode_ == EngineMode::malicious && delta_.is_zero())
        throw ConfigError("malicious mode needs a nonzero global key");
}

bool Engine::owns_input(int party, InputRole role) {
    switch (role) {
        case InputRole::Party0: return party == 0;
        case InputRole::Party1: return party == 1;
        // Public values are known to both; party 0 feeds them into the
        // sharing protocol so they flow through the same code path.
        case InputRole::Public: return party == 0;
        case InputRole::Witness: return party == 1;
    }
    return false;
}

void Engine::absorb(int sender, uint8_t type, std::span<const uint8_t> payload) {
    if (mode_ != EngineMode::malicious) return;
    transcript_.absorb_u64(static_cast<uint64_t>(sender));
    transcript_.absorb(type, payload);
}

Frame Engine::exchange(uint8_t type, std::vector<uint8_t> payload) {
    Frame mine{type, sid_, std::move(payload)};
    Frame theirs;
    if (party_ == 0) {
        ch_.send(mine);
        theirs = ch_.expect(type);
        absorb(0, type, mine.payload);
        absorb(1, type, theirs.payload);
    } else {
        theirs = ch_.expect(type);
        ch_.send(mine);
        absorb(0, type, theirs.payload);
        absorb(1, type, mine.payload);
    }
    return theirs;
}

void Engine::xor_public(uint32_t wire, uint8_t c) {
    if (!(c & 1)) return;
    if (party_ == 0)
        bits_[wire] ^= 1;
    else if (mode_ == EngineMode::malicious)
        keys_[wire] ^= delta_;
}

void Engine::set_const_one() { xor_public(1, 1); }

void Engine::eval_linear(const Gate& g) {
    if (g.kind == GateKind::Xor) {
        bits_[g.out] = bits_[g.in0] ^ bits_[g.in1];
        if (mode_ == EngineMode::malicious) {
            tags_[g.out] = tags_[g.in0] ^ tags_[g.in1];
            keys_[g.out] = keys_[g.in0] ^ keys_[g.in1];
        }
    } else {  // Not
        bits_[g.out] = bits_[g.in0];
        if (mode_ == EngineMode::malicious) {
            tags_[g.out] = tags_[g.in0];
            keys_[g.out] = keys_[g.in0];
        }
        xor_public(g.out, 1);
    }
}

size_t Engine::take_triple() {
    size_t size = mode_ == EngineMode::malicious ? auth_pool_.size() : semi_pool_.size();
    if (pool_cursor_ >= size) throw Error("triple pool exhausted");
    if (pool_used_[pool_cursor_]) throw Error("triple consumed twice");
    pool_used_[pool_cursor_] = 1;
    ++triples_used_;
    return pool_cursor_++;
}

void Engine::share_inputs(std::span<const uint8_t> my_bits) {
    if (inputs_done_) throw Error("inputs already shared");
    bits_.assign(c_.n_wires, 0);
    if (mode_ == EngineMode::malicious) {
        tags_.assign(c_.n_wires, GF128::zero());
        keys_.assign(c_.n_wires, GF128::zero());
    }
    set_const_one();

    size_t my_off = 0;
    for (const InputGroup& grp : c_.inputs) {
        bool mine = owns_input(party_, grp.role);
        if (mine && my_off + grp.count > my_bits.size())
            throw Error("input bits shorter than owned groups");

        if (mode_ == EngineMode::semi_honest) {
            if (mine) {
                std::vector<uint8_t> masked(grp.count);
                for (uint32_t i = 0; i < grp.count; ++i) {
                    uint8_t r = rng_.bit();
                    bits_[grp.first + i] = r;
                    masked[i] = static_cast<uint8_t>((my_bits[my_off + i] & 1) ^ r);
                }
                Writer w;
                w.bits(masked);
                ch_.send(Frame{msg::INPUT_SHARE, sid_, w.take()});
            } else {
                Frame f = ch_.expect(msg::INPUT_SHARE);
                Reader r(f.payload);
                auto v = r.bits();
                r.expect_end();
                if (v.size() != grp.count) throw ProtocolError("input share arity mismatch");
                for (uint32_t i = 0; i < grp.count; ++i) bits_[grp.first + i] = v[i];
            }
        } else {
            // Dealer-issued authenticated random masks; the owner learns the
            // mask from the peer's opening, then broadcasts corrections.
            auto masks = src_.auth_bits(grp.count);
            for (uint32_t i = 0; i < grp.count; ++i) {
                bits_[grp.first + i] = masks[i].bit;
                tags_[grp.first + i] = masks[i].tag;
                keys_[grp.first + i] = masks[i].key;
            }
            if (!mine) {
                Writer w;
                std::vector<uint8_t> rb(grp.count);
                for (uint32_t i = 0; i < grp.count; ++i) rb[i] = masks[i].bit;
                w.bits(rb);
                for (uint32_t i = 0; i < grp.count; ++i) w.gf(masks[i].tag);
                auto payload = w.take();
                ch_.send(Frame{msg::INPUT_SHARE, sid_, payload});
                absorb(party_, msg::INPUT_SHARE, payload);
                // Wait for the owner's public corrections.
                Frame f = ch_.expect(msg::INPUT_SHARE);
                Reader r(f.payload);
                auto corr = r.bits();
                r.expect_end();
                if (corr.size() != grp.count) throw ProtocolError("correction arity mismatch");
                absorb(1 - party_, msg::INPUT_SHARE, f.payload);
                for (uint32_t i = 0; i < grp.count; ++i) xor_public(grp.first + i, corr[i]);
            } else {
                Frame f = ch_.expect(msg::INPUT_SHARE);
                Reader r(f.payload);
                auto rb = r.bits();
                if (rb.size() != grp.count) throw ProtocolError("input share arity mismatch");
                std::vector<GF128> rtags(grp.count);
                for (uint32_t i = 0; i < grp.count; ++i) rtags[i] = r.gf();
                r.expect_end();
                absorb(1 - party_, msg::INPUT_SHARE, f.payload);
                std::vector<uint8_t> corr(grp.count);
                for (uint32_t i = 0; i < grp.count; ++i) {
                    recv_opens_.push_back(OpenRec{rb[i], rtags[i], keys_[grp.first + i]});
                    uint8_t mask_plain = static_cast<uint8_t>(bits_[grp.first + i] ^ rb[i]);
                    corr[i] = static_cast<uint8_t>((my_bits[my_off + i] & 1) ^ mask_plain);
                }
                Writer w;
                w.bits(corr);
                auto payload = w.take();
                ch_.send(Frame{msg::INPUT_SHARE, sid_, payload});
                absorb(party_, msg::INPUT_SHARE, payload);
                for (uint32_t i = 0; i < grp.count; ++i) xor_public(grp.first + i, corr[i]);
            }
        }
        if (mine) my_off += grp.count;
    }
    inputs_done_ = true;
}

void Engine::evaluate() {
    if (!inputs_done_) throw Error("share_inputs must run first");
    if (eval_done_) throw Error("circuit already evaluated");

    if (mode_ == EngineMode::malicious)
        auth_pool_ = src_.auth_triples(cc_.and_count);
    else
        semi_pool_ = src_.semi_triples(cc_.and_count);
    pool_used_.assign(cc_.and_count, 0);

    for (uint32_t idx : cc_.prologue) eval_linear(c_.gates[idx]);

    std::vector<Prep> preps;
    std::vector<uint8_t> de;
    for (const CompiledCircuit::Layer& layer : cc_.layers) {
        const size_t n = layer.ands.size();
        preps.clear();
        de.assign(2 * n, 0);
        Writer w;
        for (size_t i = 0; i < n; ++i) {
            const Gate& g = c_.gates[layer.ands[i]];
            size_t t = take_triple();
            preps.push_back(Prep{g.out, g.in0, g.in1, t});
            if (mode_ == EngineMode::malicious) {
                de[2 * i] = bits_[g.in0] ^ auth_pool_[t].a.bit;
                de[2 * i + 1] = bits_[g.in1] ^ auth_pool_[t].b.bit;
            } else {
                de[2 * i] = bits_[g.in0] ^ semi_pool_[t].a;
                de[2 * i + 1] = bits_[g.in1] ^ semi_pool_[t].b;
            }
        }
        w.bits(de);
        if (mode_ == EngineMode::malicious) {
            for (size_t i = 0; i < n; ++i) {
                const Prep& p = preps[i];
                w.gf(tags_[p.x] ^ auth_pool_[p.t].a.tag);
                w.gf(tags_[p.y] ^ auth_pool_[p.t].b.tag);
            }
        }

        Frame peer = exchange(msg::OPEN_BATCH, w.take());
        Reader r(peer.payload);
        auto pde = r.bits();
        if (pde.size() != 2 * n) throw ProtocolError("open batch arity mismatch");
        std::vector<GF128> ptags;
        if (mode_ == EngineMode::malicious) {
            ptags.resize(2 * n);
            for (size_t i = 0; i < 2 * n; ++i) ptags[i] = r.gf();
        }
        r.expect_end();

        for (size_t i = 0; i < n; ++i) {
            const Prep& p = preps[i];
            uint8_t d = de[2 * i] ^ pde[2 * i];
            uint8_t e = de[2 * i + 1] ^ pde[2 * i + 1];
            opened_values_.push_back(d);
            opened_values_.push_back(e);
            if (mode_ == EngineMode::malicious) {
                const AuthTriple& t = auth_pool_[p.t];
                recv_opens_.push_back(
                    OpenRec{pde[2 * i], ptags[2 * i], keys_[p.x] ^ t.a.key});
                recv_opens_.push_back(
                    OpenRec{pde[2 * i + 1], ptags[2 * i + 1], keys_[p.y] ^ t.b.key});
                bits_[p.out] = t.c.bit ^ (d ? t.b.bit : 0) ^ (e ? t.a.bit : 0);
                tags_[p.out] = t.c.tag ^ t.b.tag.masked(d) ^ t.a.tag.masked(e);
                keys_[p.out] = t.c.key ^ t.b.key.masked(d) ^ t.a.key.masked(e);
                xor_public(p.out, d & e);
            } else {
                const BitTriple& t = semi_pool_[p.t];
                uint8_t z = t.c ^ (d ? t.b : 0) ^ (e ? t.a : 0);
                if (party_ == 0) z ^= d & e;
                bits_[p.out] = z;
            }
        }
        for (uint32_t idx : layer.linear) eval_linear(c_.gates[idx]);
    }
    eval_done_ = true;
}

std::vector<uint8_t> Engine::reveal_to(int receiver) {
    if (!eval_done_) throw Error("evaluate must run first");
    receiver &= 1;

    if (mode_ == EngineMode::malicious) {
        // Batched verification of everything the peer opened to us, with
        // coefficients drawn from the joint transcript hash.
        Digest32 seed = transcript_.digest();
        ChiStream chi(seed, static_cast<uint8_t>(1 - party_));
        GF128 acc = GF128::zero();
        for (size_t i = 0; i < recv_opens_.size(); ++i) {
            const OpenRec& rec = recv_opens_[i];
            acc ^= gf_mul(chi.at(i), rec.tag ^ rec.key ^ delta_.masked(rec.bit));
        }
        if (!acc.is_zero()) {
            try {
                ch_.send_error(sid_, errcode::CHEAT, "opening authentication failed");
            } catch (const Error&) {
                // best effort: the peer may have torn the channel down already
            }
            throw CheatDetected("batched opening check failed");
        }
        exchange(msg::MAC_CHECK, {1});
    }

    std::vector<uint32_t> wires;
    for (const OutputGroup& grp : c_.outputs)
        for (uint32_t i = 0; i < grp.count; ++i) wires.push_back(grp.first + i);

    if (party_ != receiver) {
        Writer w;
        std::vector<uint8_t> mine(wires.size());
        for (size_t i = 0; i < wires.size(); ++i) mine[i] = bits_[wires[i]];
        w.bits(mine);
        if (mode_ == EngineMode::malicious)
            for (uint32_t wi : wires) w.gf(tags_[wi]);
        ch_.send(Frame{msg::OUTPUT_SHARE, sid_, w.take()});
        return {};
    }

    Frame f = ch_.expect(msg::OUTPUT_SHARE);
    Reader r(f.payload);
    auto theirs = r.bits();
    if (theirs.size() != wires.size()) throw ProtocolError("output share arity mismatch");
    std::vector<uint8_t> plain(wires.size());
    if (mode_ == EngineMode::malicious) {
        for (size_t i = 0; i < wires.size(); ++i) {
            GF128 tag = r.gf();
            if (tag != (keys_[wires[i]] ^ delta_.masked(theirs[i]))) {
                try {
                    ch_.send_error(sid_, errcode::CHEAT, "output tag mismatch");
                } catch (const Error&) {
                }
                throw CheatDetected("output share authentication failed");
            }
            plain[i] = bits_[wires[i]] ^ theirs[i];
        }
    } else {
        for (size_t i = 0; i < wires.size(); ++i) plain[i] = bits_[wires[i]] ^ theirs[i];
    }
    r.expect_end();
    return plain;
}

}  // namespace skyveil
