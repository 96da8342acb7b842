#include "skyveil/circuit.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <unordered_map>

namespace skyveil {

uint32_t Circuit::input_bits() const {
    uint32_t n = 0;
    for (const auto& g : inputs) n += g.count;
    return n;
}

uint32_t Circuit::output_bits() const {
    uint32_t n = 0;
    for (const auto& g : outputs) n += g.count;
    return n;
}

CircuitStats Circuit::stats() const {
    CircuitStats s;
    std::vector<uint64_t> depth(n_wires, 0);
    for (const auto& g : gates) {
        uint64_t d;
        switch (g.kind) {
            case GateKind::And:
                s.and_count++;
                d = std::max(depth[g.in0], depth[g.in1]) + 1;
                break;
            case GateKind::Xor:
                s.xor_count++;
                d = std::max(depth[g.in0], depth[g.in1]);
                break;
            default:
                s.not_count++;
                d = depth[g.in0];
                break;
        }
        depth[g.out] = d;
        s.depth = std::max(s.depth, d);
    }
    return s;
}

void Circuit::validate() const {
    uint32_t cursor = 2;
    for (const auto& grp : inputs) {
        if (grp.first != cursor)
            throw std::invalid_argument("input group '" + grp.name + "' not contiguous");
        cursor += grp.count;
    }
    if (n_wires != cursor + gates.size())
        throw std::invalid_argument("wire count mismatch");
    for (size_t i = 0; i < gates.size(); i++) {
        const Gate& g = gates[i];
        if (g.out != cursor + i)
            throw std::invalid_argument("gate output breaks static assignment order");
        if (g.in0 >= g.out || (g.kind != GateKind::Not && g.in1 >= g.out))
            throw std::invalid_argument("gate reads a wire not yet assigned");
    }
    uint32_t out_total = output_bits();
    if (out_total > n_wires)
        throw std::invalid_argument("more output bits than wires");
    uint32_t pos = n_wires - out_total;
    for (const auto& grp : outputs) {
        if (grp.first != pos)
            throw std::invalid_argument("output group '" + grp.name + "' not in trailing position");
        pos += grp.count;
    }
}

std::vector<uint8_t> evaluate(const Circuit& c, std::span<const uint8_t> inputs) {
    if (inputs.size() != c.input_bits())
        throw std::invalid_argument("evaluate: wrong input bit count");
    std::vector<uint8_t> w(c.n_wires, 0);
    w[1] = 1;
    std::copy(inputs.begin(), inputs.end(), w.begin() + 2);
    for (const auto& g : c.gates) {
        switch (g.kind) {
            case GateKind::Xor: w[g.out] = w[g.in0] ^ w[g.in1]; break;
            case GateKind::And: w[g.out] = w[g.in0] & w[g.in1]; break;
            case GateKind::Not: w[g.out] = w[g.in0] ^ 1; break;
        }
    }
    std::vector<uint8_t> out;
    out.reserve(c.output_bits());
    for (const auto& grp : c.outputs)
        for (uint32_t i = 0; i < grp.count; i++) out.push_back(w[grp.first + i]);
    return out;
}

std::vector<uint8_t> bits_from_u128(u128 v, int width) {
    std::vector<uint8_t> bits(width);
    for (int i = 0; i < width; i++) bits[i] = static_cast<uint8_t>((v >> i) & 1);
    return bits;
}

u128 u128_from_bits(std::span<const uint8_t> bits) {
    u128 v = 0;
    for (size_t i = 0; i < bits.size(); i++)
        if (bits[i]) v |= u128{1} << i;
    return v;
}

// ---------------------------------------------------------------------------
// Builder

Builder::Builder(std::optional<FpParams> meta) { c_.params = meta; }

uint32_t Builder::alloc() { return c_.n_wires++; }

Builder::Word Builder::add_input(const std::string& name, InputRole role, uint32_t width) {
    if (!c_.gates.empty())
        throw std::logic_error("inputs must be declared before any gate");
    InputGroup g{name, role, c_.n_wires, width};
    c_.inputs.push_back(g);
    Word w(width);
    for (uint32_t i = 0; i < width; i++) w[i] = alloc();
    return w;
}

void Builder::add_output(const std::string& name, const Word& w) {
    // Recorded now, buffered into trailing wires by finish().
    OutputGroup g{name, 0, static_cast<uint32_t>(w.size())};
    c_.outputs.push_back(g);
    pending_outputs_.push_back(w);
}

Circuit Builder::finish() {
    if (finished_) throw std::logic_error("finish() called twice");
    finished_ = true;
    for (size_t i = 0; i < c_.outputs.size(); i++) {
        c_.outputs[i].first = c_.n_wires;
        for (uint32_t src : pending_outputs_[i]) gxor(src, kZero);
    }
    c_.validate();
    return std::move(c_);
}

uint32_t Builder::gxor(uint32_t a, uint32_t b) {
    uint32_t o = alloc();
    c_.gates.push_back({GateKind::Xor, a, b, o});
    return o;
}

uint32_t Builder::gand(uint32_t a, uint32_t b) {
    uint32_t o = alloc();
    c_.gates.push_back({GateKind::And, a, b, o});
    return o;
}

uint32_t Builder::gnot(uint32_t a) {
    uint32_t o = alloc();
    c_.gates.push_back({GateKind::Not, a, 0, o});
    return o;
}

uint32_t Builder::gor(uint32_t a, uint32_t b) {
    // a | b == a ^ b ^ (a & b)
    return gxor(gxor(a, b), gand(a, b));
}

uint32_t Builder::mux(uint32_t sel, uint32_t when1, uint32_t when0) {
    return gxor(when0, gand(sel, gxor(when1, when0)));
}

Builder::Word Builder::w_const(u128 value, int width) {
    Word w(width);
    for (int i = 0; i < width; i++) w[i] = ((value >> i) & 1) ? kOne : kZero;
    return w;
}

Builder::Word Builder::w_xor(const Word& a, const Word& b) {
    assert(a.size() == b.size());
    Word o(a.size());
    for (size_t i = 0; i < a.size(); i++) o[i] = gxor(a[i], b[i]);
    return o;
}

Builder::Word Builder::zext(Word a, size_t width) const {
    assert(a.size() <= width);
    a.resize(width, kZero);
    return a;
}

Builder::Word Builder::sext(Word a, size_t width) {
    assert(!a.empty() && a.size() <= width);
    uint32_t sign = a.back();
    a.resize(width, sign);
    return a;
}

Builder::Word Builder::shl(const Word& a, size_t amount) {
    Word o(amount, kZero);
    o.insert(o.end(), a.begin(), a.end());
    return o;
}

Builder::Word Builder::select(uint32_t sel, const Word& when1, const Word& when0) {
    assert(when1.size() == when0.size());
    Word o(when1.size());
    for (size_t i = 0; i < o.size(); i++) o[i] = mux(sel, when1[i], when0[i]);
    return o;
}

namespace {

// Ripple carry over equal-width words. One AND per bit:
// carry' = a ^ ((a ^ b) & (carry ^ a)).
struct Ripple {
    static Builder::Word run(Builder& bld, const Builder::Word& a, const Builder::Word& b,
                             uint32_t carry_in, uint32_t* carry_out) {
        assert(a.size() == b.size());
        Builder::Word sum(a.size());
        uint32_t c = carry_in;
        for (size_t i = 0; i < a.size(); i++) {
            uint32_t axb = bld.gxor(a[i], b[i]);
            sum[i] = bld.gxor(axb, c);
            c = bld.gxor(a[i], bld.gand(axb, bld.gxor(c, a[i])));
        }
        if (carry_out) *carry_out = c;
        return sum;
    }
};

}  // namespace

Builder::Word Builder::add_signed(const Word& a, const Word& b) {
    assert(a.size() == b.size());
    size_t w = a.size() + 1;
    Word ax = sext(a, w), bx = sext(b, w);
    return Ripple::run(*this, ax, bx, kZero, nullptr);
}

Builder::Word Builder::sub_signed(const Word& a, const Word& b) {
    assert(a.size() == b.size());
    size_t w = a.size() + 1;
    Word ax = sext(a, w), bx = sext(b, w);
    for (auto& bit : bx) bit = gnot(bit);
    return Ripple::run(*this, ax, bx, kOne, nullptr);
}

Builder::Word Builder::add_unsigned(const Word& a, const Word& b, size_t out_width) {
    Word ax = zext(a, out_width), bx = zext(b, out_width);
    return Ripple::run(*this, ax, bx, kZero, nullptr);
}

std::pair<Builder::Word, uint32_t> Builder::sub_borrow(const Word& a, const Word& b) {
    assert(a.size() == b.size());
    Word bn(b.size());
    for (size_t i = 0; i < b.size(); i++) bn[i] = gnot(b[i]);
    uint32_t carry = 0;
    Word diff = Ripple::run(*this, a, bn, kOne, &carry);
    return {diff, gnot(carry)};
}

Builder::Word Builder::negate(const Word& a) {
    Word an(a.size());
    for (size_t i = 0; i < a.size(); i++) an[i] = gnot(a[i]);
    Word zero(a.size(), kZero);
    return Ripple::run(*this, an, zero, kOne, nullptr);
}

uint32_t Builder::geq_unsigned(const Word& a, const Word& b) {
    assert(a.size() == b.size());
    // Scan LSB to MSB: once bits differ, the higher bit decides.
    uint32_t ge = kOne;
    for (size_t i = 0; i < a.size(); i++) ge = mux(gxor(a[i], b[i]), a[i], ge);
    return ge;
}

uint32_t Builder::geq_signed(const Word& a, const Word& b) {
    assert(!a.empty() && a.size() == b.size());
    Word ax = a, bx = b;
    ax.back() = gxor(ax.back(), kOne);
    bx.back() = gxor(bx.back(), kOne);
    return geq_unsigned(ax, bx);
}

Builder::Word Builder::mul(const Word& a, const Word& b) {
    assert(!a.empty() && !b.empty());
    struct Part {
        Word w;
        size_t off;
    };
    std::vector<Part> parts;
    parts.reserve(b.size());
    for (size_t i = 0; i < b.size(); i++) {
        Word row(a.size());
        for (size_t j = 0; j < a.size(); j++) row[j] = gand(a[j], b[i]);
        parts.push_back({std::move(row), i});
    }
    // Balanced combination keeps the AND depth near width * log(width)
    // instead of the quadratic depth of a serial accumulator.
    while (parts.size() > 1) {
        std::vector<Part> next;
        next.reserve((parts.size() + 1) / 2);
        for (size_t i = 0; i + 1 < parts.size(); i += 2) {
            Part* p = &parts[i];
            Part* q = &parts[i + 1];
            if (p->off > q->off) std::swap(p, q);
            size_t gap = q->off - p->off;
            Word low, pa;
            if (gap >= p->w.size()) {
                low = p->w;
                low.resize(gap, kZero);
            } else {
                low.assign(p->w.begin(), p->w.begin() + gap);
                pa.assign(p->w.begin() + gap, p->w.end());
            }
            size_t w = std::max(pa.size(), q->w.size()) + 1;
            Word hi = add_unsigned(pa, q->w, w);
            low.insert(low.end(), hi.begin(), hi.end());
            next.push_back({std::move(low), p->off});
        }
        if (parts.size() % 2) next.push_back(std::move(parts.back()));
        parts = std::move(next);
    }
    Word out = shl(parts[0].w, parts[0].off);
    // The product fits |a|+|b| bits, so every materialized bit above that
    // bound is identically zero and can be dropped.
    out.resize(a.size() + b.size(), kZero);
    return out;
}

Builder::Word Builder::isqrt(const Word& radicand) {
    Word d = radicand;
    if (d.size() % 2) d.push_back(kZero);
    size_t w = d.size() / 2;
    Word q;  // grows one bit per step, LSB first
    Word r;  // remainder register
    for (size_t t = 0; t < w; t++) {
        size_t i = w - 1 - t;
        Word rp;
        rp.push_back(d[2 * i]);
        rp.push_back(d[2 * i + 1]);
        rp.insert(rp.end(), r.begin(), r.end());
        Word trial;  // 4q + 1
        trial.push_back(kOne);
        trial.push_back(kZero);
        trial.insert(trial.end(), q.begin(), q.end());
        size_t cw = std::max(rp.size(), trial.size());
        rp = zext(rp, cw);
        trial = zext(trial, cw);
        auto [diff, borrow] = sub_borrow(rp, trial);
        uint32_t bit = gnot(borrow);
        Word rn = select(borrow, rp, diff);
        // After the step the remainder is at most twice the root so far,
        // which has t+1 bits.
        rn.resize(std::min(cw, t + 2));
        r = std::move(rn);
        q.insert(q.begin(), bit);
    }
    return q;
}

Builder::Word Builder::divide(const Word& num, const Word& den) {
    size_t n = num.size(), dw = den.size();
    uint32_t nz = or_reduce(den);
    Word r(dw, kZero);
    Word q(n);
    for (size_t t = 0; t < n; t++) {
        size_t i = n - 1 - t;
        Word rp;
        rp.push_back(num[i]);
        rp.insert(rp.end(), r.begin(), r.end());
        auto [diff, borrow] = sub_borrow(rp, zext(den, dw + 1));
        q[i] = gand(gnot(borrow), nz);
        Word rn = select(borrow, rp, diff);
        rn.resize(dw);
        r = std::move(rn);
    }
    return q;
}

Builder::Word Builder::divide_bounded(const Word& num, const Word& den, size_t qbits) {
    size_t n = num.size(), dw = den.size();
    if (qbits > n || n - qbits > dw)
        throw std::logic_error("divide_bounded: remainder register too narrow");
    uint32_t nz = or_reduce(den);
    Word r(num.begin() + qbits, num.end());
    r = zext(std::move(r), dw);
    Word q(qbits);
    for (size_t t = 0; t < qbits; t++) {
        size_t i = qbits - 1 - t;
        Word rp;
        rp.push_back(num[i]);
        rp.insert(rp.end(), r.begin(), r.end());
        auto [diff, borrow] = sub_borrow(rp, zext(den, dw + 1));
        q[i] = gand(gnot(borrow), nz);
        Word rn = select(borrow, rp, diff);
        rn.resize(dw);
        r = std::move(rn);
    }
    return q;
}

uint32_t Builder::or_reduce(const Word& a) {
    if (a.empty()) return kZero;
    std::vector<uint32_t> cur = a;
    while (cur.size() > 1) {
        std::vector<uint32_t> next;
        next.reserve((cur.size() + 1) / 2);
        for (size_t i = 0; i + 1 < cur.size(); i += 2) next.push_back(gor(cur[i], cur[i + 1]));
        if (cur.size() % 2) next.push_back(cur.back());
        cur = std::move(next);
    }
    return cur[0];
}

std::pair<Builder::Word, uint32_t> Builder::abs_split(const Word& a) {
    uint32_t sign = a.back();
    Word mag = select(sign, negate(a), a);
    return {mag, sign};
}

// ---------------------------------------------------------------------------
// Library circuits

Circuit build_adder(int k) {
    Builder b;
    auto a = b.add_input("a", InputRole::Party0, k);
    auto c = b.add_input("b", InputRole::Party1, k);
    b.add_output("sum", b.add_signed(a, c));
    return b.finish();
}

Circuit build_subtractor(int k) {
    Builder b;
    auto a = b.add_input("a", InputRole::Party0, k);
    auto c = b.add_input("b", InputRole::Party1, k);
    b.add_output("diff", b.sub_signed(a, c));
    return b.finish();
}

Circuit build_comparator_geq(int k) {
    Builder b;
    auto a = b.add_input("a", InputRole::Party0, k);
    auto c = b.add_input("b", InputRole::Party1, k);
    b.add_output("geq", {b.geq_signed(a, c)});
    return b.finish();
}

Circuit build_multiplier(int k) {
    Builder b;
    auto a = b.add_input("a", InputRole::Party0, k);
    auto c = b.add_input("b", InputRole::Party1, k);
    b.add_output("product", b.mul(a, c));
    return b.finish();
}

Circuit build_isqrt(int k) {
    Builder b;
    auto a = b.add_input("radicand", InputRole::Party0, k);
    b.add_output("root", b.isqrt(a));
    return b.finish();
}

Circuit build_divider(int kn, int kd) {
    Builder b;
    auto n = b.add_input("numerator", InputRole::Party0, kn);
    auto d = b.add_input("denominator", InputRole::Party1, kd);
    b.add_output("quotient", b.divide(n, d));
    return b.finish();
}

Circuit build_trajectory(FpParams p) {
    const int k = p.k, f = p.f;
    Builder b(p);
    Builder::Word sat[3], air[3];
    sat[0] = b.add_input("sat_x", InputRole::Party0, k);
    sat[1] = b.add_input("sat_y", InputRole::Party0, k);
    sat[2] = b.add_input("sat_z", InputRole::Party0, k);
    air[0] = b.add_input("air_x", InputRole::Party1, k);
    air[1] = b.add_input("air_y", InputRole::Party1, k);
    air[2] = b.add_input("air_z", InputRole::Party1, k);

    Builder::Word mag[3];
    uint32_t sign[3];
    Builder::Word sq[3];
    for (int i = 0; i < 3; i++) {
        auto v = b.sub_signed(air[i], sat[i]);  // k+1 bits, exact
        auto [m, s] = b.abs_split(v);
        mag[i] = std::move(m);
        sign[i] = s;
        sq[i] = b.mul(mag[i], mag[i]);  // 2k+2 bits
    }
    auto s01 = b.add_unsigned(sq[0], sq[1], 2 * k + 3);
    auto sum = b.add_unsigned(s01, sq[2], 2 * k + 4);
    auto m = b.isqrt(sum);  // k+2 bits

    for (int i = 0; i < 3; i++) {
        // numerator |v_i| * 2^f; |v_i| <= m guarantees the quotient fits
        // f+1 bits, so only f+1 restoring steps are needed.
        auto numer = Builder::shl(mag[i], f);
        auto q = b.divide_bounded(numer, m, f + 1);
        auto qk = b.zext(std::move(q), k);
        static const char* names[3] = {"unit_x", "unit_y", "unit_z"};
        b.add_output(names[i], b.select(sign[i], b.negate(qk), qk));
    }
    return b.finish();
}

Circuit build_range_check(FpParams p) {
    const int k = p.k;
    Builder b(p);
    Builder::Word loc[3];
    loc[0] = b.add_input("loc_x", InputRole::Witness, k);
    loc[1] = b.add_input("loc_y", InputRole::Witness, k);
    loc[2] = b.add_input("loc_z", InputRole::Witness, k);
    static const char* bnames[6] = {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max"};
    Builder::Word bnd[6];
    for (int i = 0; i < 6; i++) bnd[i] = b.add_input(bnames[i], InputRole::Public, k);

    uint32_t axis_ok[3];
    for (int i = 0; i < 3; i++) {
        uint32_t lo = b.geq_signed(loc[i], bnd[2 * i]);
        uint32_t hi = b.geq_signed(bnd[2 * i + 1], loc[i]);
        axis_ok[i] = b.gand(lo, hi);
    }
    uint32_t valid = b.gand(b.gand(axis_ok[0], axis_ok[1]), axis_ok[2]);
    b.add_output("valid", {valid});
    return b.finish();
}

// ---------------------------------------------------------------------------
// Optimizer: hash-consed AIG-style rewrite over literals (node id * 2 | neg).

namespace {

struct Hasher {
    size_t operator()(const std::pair<uint64_t, uint64_t>& p) const {
        uint64_t h = p.first * 0x9e3779b97f4a7c15ULL;
        h ^= p.second + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        return static_cast<size_t>(h);
    }
};

class Rewriter {
public:
    enum class Kind : uint8_t { Const0, Input, And, Xor };
    struct Node {
        Kind kind;
        uint64_t a = 0, b = 0;   // input literals
        uint32_t wire = 0;       // for Input: original wire index
    };

    Rewriter() { nodes_.push_back({Kind::Const0, 0, 0, 0}); }

    uint64_t input(uint32_t wire) {
        nodes_.push_back({Kind::Input, 0, 0, wire});
        return (nodes_.size() - 1) * 2;
    }

    static uint64_t constant(int bit) { return bit ? 1 : 0; }
    static uint64_t node_of(uint64_t lit) { return lit >> 1; }
    static bool neg_of(uint64_t lit) { return lit & 1; }

    uint64_t mk_xor(uint64_t la, uint64_t lb) {
        if (node_of(la) == node_of(lb)) return constant(neg_of(la) != neg_of(lb));
        if (node_of(la) == 0) return lb ^ (la & 1);
        if (node_of(lb) == 0) return la ^ (lb & 1);
        uint64_t neg = (la ^ lb) & 1;
        uint64_t na = la & ~1ULL, nb = lb & ~1ULL;
        if (na > nb) std::swap(na, nb);
        auto key = std::make_pair(na, nb);
        auto it = xor_map_.find(key);
        if (it != xor_map_.end()) return (it->second * 2) ^ neg;
        nodes_.push_back({Kind::Xor, na, nb, 0});
        uint64_t id = nodes_.size() - 1;
        xor_map_.emplace(key, id);
        return id * 2 + neg;
    }

    uint64_t mk_and(uint64_t la, uint64_t lb) {
        if (la == 0 || lb == 0) return 0;
        if (la == 1) return lb;
        if (lb == 1) return la;
        if (la == lb) return la;
        if (node_of(la) == node_of(lb)) return 0;  // x & ~x
        if (la > lb) std::swap(la, lb);
        auto key = std::make_pair(la, lb);
        auto it = and_map_.find(key);
        if (it != and_map_.end()) return it->second * 2;
        nodes_.push_back({Kind::And, la, lb, 0});
        uint64_t id = nodes_.size() - 1;
        and_map_.emplace(key, id);
        return id * 2;
    }

    static uint64_t mk_not(uint64_t la) { return la ^ 1; }

    const std::vector<Node>& nodes() const { return nodes_; }

private:
    std::vector<Node> nodes_;
    std::unordered_map<std::pair<uint64_t, uint64_t>, uint64_t, Hasher> and_map_;
    std::unordered_map<std::pair<uint64_t, uint64_t>, uint64_t, Hasher> xor_map_;
};

}  // namespace

Circuit optimize(const Circuit& c) {
    c.validate();
    Rewriter rw;
    std::vector<uint64_t> lit(c.n_wires);
    lit[0] = Rewriter::constant(0);
    lit[1] = Rewriter::constant(1);
    uint32_t n_in = c.input_bits();
    for (uint32_t i = 0; i < n_in; i++) lit[2 + i] = rw.input(2 + i);
    for (const auto& g : c.gates) {
        switch (g.kind) {
            case GateKind::Xor: lit[g.out] = rw.mk_xor(lit[g.in0], lit[g.in1]); break;
            case GateKind::And: lit[g.out] = rw.mk_and(lit[g.in0], lit[g.in1]); break;
            case GateKind::Not: lit[g.out] = Rewriter::mk_not(lit[g.in0]); break;
        }
    }

    // Mark nodes reachable from the outputs.
    const auto& nodes = rw.nodes();
    std::vector<uint8_t> live(nodes.size(), 0);
    std::vector<uint64_t> stack;
    for (const auto& grp : c.outputs)
        for (uint32_t i = 0; i < grp.count; i++)
            stack.push_back(Rewriter::node_of(lit[grp.first + i]));
    while (!stack.empty()) {
        uint64_t id = stack.back();
        stack.pop_back();
        if (live[id]) continue;
        live[id] = 1;
        const auto& n = nodes[id];
        if (n.kind == Rewriter::Kind::And || n.kind == Rewriter::Kind::Xor) {
            stack.push_back(Rewriter::node_of(n.a));
            stack.push_back(Rewriter::node_of(n.b));
        }
    }

    Circuit out;
    out.params = c.params;
    out.inputs = c.inputs;
    out.n_wires = 2 + n_in;
    std::vector<uint32_t> node_wire(nodes.size(), UINT32_MAX);
    std::vector<uint32_t> neg_wire(nodes.size(), UINT32_MAX);
    node_wire[0] = 0;
    neg_wire[0] = 1;

    auto emit = [&](GateKind kind, uint32_t a, uint32_t b) {
        uint32_t o = out.n_wires++;
        out.gates.push_back({kind, a, b, o});
        return o;
    };
    auto wire_of = [&](uint64_t l) {
        uint64_t id = Rewriter::node_of(l);
        if (!Rewriter::neg_of(l)) return node_wire[id];
        if (neg_wire[id] == UINT32_MAX) neg_wire[id] = emit(GateKind::Xor, node_wire[id], 1);
        return neg_wire[id];
    };

    for (uint64_t id = 1; id < nodes.size(); id++) {
        const auto& n = nodes[id];
        if (n.kind == Rewriter::Kind::Input) {
            node_wire[id] = n.wire;
            continue;
        }
        if (!live[id]) continue;
        uint32_t a = wire_of(n.a);
        uint32_t b = wire_of(n.b);
        node_wire[id] = emit(n.kind == Rewriter::Kind::And ? GateKind::And : GateKind::Xor, a, b);
    }

    // Gather output literals, materialize their base wires, then lay the
    // buffers down contiguously at the tail: the buffer absorbs a pending
    // negation as XOR with the constant-1 wire.
    out.outputs = c.outputs;
    std::vector<uint64_t> out_lits;
    std::vector<uint32_t> srcs;
    for (const auto& grp : c.outputs)
        for (uint32_t i = 0; i < grp.count; i++) {
            uint64_t l = lit[grp.first + i];
            out_lits.push_back(l);
            srcs.push_back(node_wire[Rewriter::node_of(l)]);
        }
    uint32_t pos = out.n_wires;
    size_t idx = 0;
    for (auto& grp : out.outputs) {
        grp.first = pos;
        for (uint32_t i = 0; i < grp.count; i++, idx++)
            emit(GateKind::Xor, srcs[idx], Rewriter::neg_of(out_lits[idx]) ? 1u : 0u);
        pos += grp.count;
    }
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------

CompiledCircuit CompiledCircuit::compile(const Circuit& c) {
    c.validate();
    CompiledCircuit cc;
    cc.circuit = &c;
    std::vector<uint32_t> depth(c.n_wires, 0);
    uint32_t max_depth = 0;
    std::vector<std::pair<uint32_t, uint32_t>> gate_depth(c.gates.size());
    for (size_t i = 0; i < c.gates.size(); i++) {
        const Gate& g = c.gates[i];
        uint32_t d = depth[g.in0];
        if (g.kind != GateKind::Not) d = std::max(d, depth[g.in1]);
        if (g.kind == GateKind::And) {
            d += 1;
            cc.and_count++;
        }
        depth[g.out] = d;
        gate_depth[i] = {static_cast<uint32_t>(i), d};
        max_depth = std::max(max_depth, d);
    }
    cc.layers.resize(max_depth);
    for (size_t i = 0; i < c.gates.size(); i++) {
        uint32_t d = gate_depth[i].second;
        if (c.gates[i].kind == GateKind::And)
            cc.layers[d - 1].ands.push_back(gate_depth[i].first);
        else if (d == 0)
            cc.prologue.push_back(gate_depth[i].first);
        else
            cc.layers[d - 1].linear.push_back(gate_depth[i].first);
    }
    return cc;
}

}  // namespace skyveil
