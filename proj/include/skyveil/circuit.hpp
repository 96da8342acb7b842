#ifndef SKYVEIL_CIRCUIT_HPP
#define SKYVEIL_CIRCUIT_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skyveil/fixedpoint.hpp"

namespace skyveil {

// Boolean circuits over the {XOR, AND, NOT} basis. Wires are indices in
// single static assignment: wire 0 is the constant 0, wire 1 the constant 1,
// input groups follow from wire 2, and every gate writes a strictly larger
// wire than it reads. Output groups always occupy the final wires.
enum class GateKind : uint8_t { Xor, And, Not };

struct Gate {
    GateKind kind;
    uint32_t in0;
    uint32_t in1;  // ignored for Not
    uint32_t out;
};

enum class InputRole : uint8_t { Party0, Party1, Witness, Public };

struct InputGroup {
    std::string name;
    InputRole role;
    uint32_t first;
    uint32_t count;
};

struct OutputGroup {
    std::string name;
    uint32_t first;
    uint32_t count;
};

struct CircuitStats {
    uint64_t and_count = 0;
    uint64_t xor_count = 0;
    uint64_t not_count = 0;
    uint64_t depth = 0;  // AND depth
};

struct Circuit {
    uint32_t n_wires = 2;
    std::vector<InputGroup> inputs;
    std::vector<OutputGroup> outputs;
    std::vector<Gate> gates;
    std::optional<FpParams> params;

    uint32_t input_bits() const;
    uint32_t output_bits() const;
    CircuitStats stats() const;
    // Checks SSA, topological order, wire ranges, and output placement.
    // Throws std::invalid_argument on violation.
    void validate() const;
};

// Forward evaluation. `inputs` holds one bit per input wire, groups
// concatenated in declaration order. Returns the output bits likewise.
std::vector<uint8_t> evaluate(const Circuit& c, std::span<const uint8_t> inputs);

// Semantics-preserving cleanup: constant propagation, NOT fusion into
// XOR-with-1, commutative-operand canonicalization, structural hashing,
// and dead-gate elimination. Never increases the AND count.
Circuit optimize(const Circuit& c);

// bit helpers (LSB first)
std::vector<uint8_t> bits_from_u128(u128 v, int width);
u128 u128_from_bits(std::span<const uint8_t> bits);

class Builder {
public:
    using Word = std::vector<uint32_t>;

    explicit Builder(std::optional<FpParams> meta = std::nullopt);

    Word add_input(const std::string& name, InputRole role, uint32_t width);
    void add_output(const std::string& name, const Word& w);
    Circuit finish();  // buffers outputs into the trailing wires

    static constexpr uint32_t kZero = 0;
    static constexpr uint32_t kOne = 1;

    // gates
    uint32_t gxor(uint32_t a, uint32_t b);
    uint32_t gand(uint32_t a, uint32_t b);
    uint32_t gnot(uint32_t a);
    uint32_t gor(uint32_t a, uint32_t b);
    uint32_t mux(uint32_t sel, uint32_t when1, uint32_t when0);

    // word ops; words are LSB-first wire vectors
    Word w_const(u128 value, int width);
    Word w_xor(const Word& a, const Word& b);
    Word zext(Word a, size_t width) const;
    Word sext(Word a, size_t width);
    static Word shl(const Word& a, size_t amount);  // prepend constant zeros
    Word select(uint32_t sel, const Word& when1, const Word& when0);

    // exact signed sum/difference of equal-width operands, width+1 result
    Word add_signed(const Word& a, const Word& b);
    Word sub_signed(const Word& a, const Word& b);
    // unsigned add, result width chosen by caller (>= operand widths)
    Word add_unsigned(const Word& a, const Word& b, size_t out_width);
    // a - b with borrow out; equal widths
    std::pair<Word, uint32_t> sub_borrow(const Word& a, const Word& b);
    Word negate(const Word& a);  // two's complement, same width

    uint32_t geq_unsigned(const Word& a, const Word& b);
    uint32_t geq_signed(const Word& a, const Word& b);

    // unsigned multiply, |a|+|b| bits
    Word mul(const Word& a, const Word& b);
    // floor(sqrt()) of an unsigned word, ceil(n/2) result bits
    Word isqrt(const Word& radicand);
    // unsigned restoring division, quotient has |num| bits; all-zero on den==0
    Word divide(const Word& num, const Word& den);
    // restoring division when the caller guarantees num < den * 2^qbits
    // (den != 0); quotient has qbits bits; all-zero on den==0
    Word divide_bounded(const Word& num, const Word& den, size_t qbits);

    uint32_t or_reduce(const Word& a);
    std::pair<Word, uint32_t> abs_split(const Word& a);  // magnitude, sign

private:
    uint32_t alloc();
    Circuit c_;
    std::vector<Word> pending_outputs_;
    bool finished_ = false;
};

// circuit library
Circuit build_adder(int k);           // a, b signed k-bit; sum k+1 bits
Circuit build_subtractor(int k);      // a - b, sign-extended k+1-bit result
Circuit build_comparator_geq(int k);  // signed a >= b, one bit
Circuit build_multiplier(int k);      // unsigned, 2k-bit product
Circuit build_isqrt(int k);           // unsigned radicand, ceil(k/2)-bit root
Circuit build_divider(int kn, int kd);  // unsigned, kn-bit quotient

// Trajectory-unit-vector circuit: party-0 inputs (x_s,y_s,z_s), party-1
// inputs (x_a,y_a,z_a), output 3k bits; bit-exact vs. trajectory_plain and
// all-zero on the degenerate equal-location case.
Circuit build_trajectory(FpParams p);

// Bounds-check circuit: witness location (3k bits), public bounds (6k bits,
// order x_min,x_max,y_min,y_max,z_min,z_max), one output bit.
Circuit build_range_check(FpParams p);

// Evaluation schedule for the interactive engines: AND gates grouped by
// AND-depth layer, linear gates attached to the layer they become
// computable in.
struct CompiledCircuit {
    const Circuit* circuit = nullptr;
    struct Layer {
        std::vector<uint32_t> ands;    // gate indices
        std::vector<uint32_t> linear;  // gate indices, original order
    };
    std::vector<uint32_t> prologue;  // linear gates computable from inputs
    std::vector<Layer> layers;
    uint64_t and_count = 0;

    static CompiledCircuit compile(const Circuit& c);
};

}  // namespace skyveil

#endif
