#ifndef SKYVEIL_BRISTOL_HPP
#define SKYVEIL_BRISTOL_HPP

#include <iosfwd>
#include <string>

#include "skyveil/circuit.hpp"

namespace skyveil {

// Bristol-fashion text: first line `<n_gates> <n_wires>`, second line the
// input group count followed by each group's arity, third line the same for
// outputs, then one gate per line (`2 1 <in0> <in1> <out> XOR|AND` or
// `1 1 <in> <out> INV`). Wires are zero-indexed; wires 0 and 1 are the
// constant-0 and constant-1 wires.
std::string to_bristol(const Circuit& c);

// Parses the format above. Group names and party roles are not part of the
// text; groups come back as input_0, input_1, ... / output_0, ... with
// alternating Party0/Party1 roles. Throws ParseError with a line number.
Circuit from_bristol(const std::string& text);

Circuit load_bristol_file(const std::string& path);
void save_bristol_file(const Circuit& c, const std::string& path);

}  // namespace skyveil

#endif
