#include "skyveil/bristol.hpp"

#include <fstream>
#include <sstream>

#include "skyveil/errors.hpp"

namespace skyveil {

std::string to_bristol(const Circuit& c) {
    std::ostringstream out;
    out << c.gates.size() << ' ' << c.n_wires << '\n';
    out << c.inputs.size();
    for (const auto& g : c.inputs) out << ' ' << g.count;
    out << '\n';
    out << c.outputs.size();
    for (const auto& g : c.outputs) out << ' ' << g.count;
    out << '\n';
    for (const auto& g : c.gates) {
        switch (g.kind) {
            case GateKind::Xor:
                out << "2 1 " << g.in0 << ' ' << g.in1 << ' ' << g.out << " XOR\n";
                break;
            case GateKind::And:
                out << "2 1 " << g.in0 << ' ' << g.in1 << ' ' << g.out << " AND\n";
                break;
            case GateKind::Not:
                out << "1 1 " << g.in0 << ' ' << g.out << " INV\n";
                break;
        }
    }
    return out.str();
}

namespace {

struct LineReader {
    std::istringstream in;
    int line_no = 0;
    explicit LineReader(const std::string& text) : in(text) {}

    // Next non-empty line, or empty optional at end of text.
    bool next(std::string& out) {
        std::string s;
        while (std::getline(in, s)) {
            line_no++;
            if (!s.empty() && s.back() == '\r') s.pop_back();
            if (s.find_first_not_of(" \t") == std::string::npos) continue;
            out = s;
            return true;
        }
        return false;
    }
};

std::vector<uint64_t> parse_numbers(const std::string& s, int line_no, size_t expect = 0) {
    std::istringstream in(s);
    std::vector<uint64_t> v;
    uint64_t x;
    while (in >> x) v.push_back(x);
    if (in.fail() && !in.eof()) {
        in.clear();
        std::string rest;
        in >> rest;
        throw ParseError("unexpected token '" + rest + "'", line_no);
    }
    if (expect && v.size() != expect)
        throw ParseError("expected " + std::to_string(expect) + " numbers", line_no);
    return v;
}

}  // namespace

Circuit from_bristol(const std::string& text) {
    LineReader rd(text);
    std::string line;
    if (!rd.next(line)) throw ParseError("empty circuit text", 1);
    auto hdr = parse_numbers(line, rd.line_no, 2);
    uint64_t n_gates = hdr[0], n_wires = hdr[1];
    if (n_wires < 2 || n_wires > (1ULL << 32))
        throw ParseError("wire count out of range", rd.line_no);

    Circuit c;
    c.n_wires = static_cast<uint32_t>(n_wires);

    if (!rd.next(line)) throw ParseError("missing input arity line", rd.line_no);
    auto in_arity = parse_numbers(line, rd.line_no);
    if (in_arity.empty() || in_arity[0] != in_arity.size() - 1)
        throw ParseError("input arity line must start with the group count", rd.line_no);
    uint32_t cursor = 2;
    for (size_t i = 1; i < in_arity.size(); i++) {
        InputGroup g;
        g.name = "input_" + std::to_string(i - 1);
        g.role = (i % 2) ? InputRole::Party0 : InputRole::Party1;
        g.first = cursor;
        g.count = static_cast<uint32_t>(in_arity[i]);
        cursor += g.count;
        c.inputs.push_back(std::move(g));
    }

    if (!rd.next(line)) throw ParseError("missing output arity line", rd.line_no);
    auto out_arity = parse_numbers(line, rd.line_no);
    if (out_arity.empty() || out_arity[0] != out_arity.size() - 1)
        throw ParseError("output arity line must start with the group count", rd.line_no);
    uint64_t out_total = 0;
    for (size_t i = 1; i < out_arity.size(); i++) out_total += out_arity[i];
    if (out_total > n_wires) throw ParseError("outputs exceed wire count", rd.line_no);
    uint32_t opos = static_cast<uint32_t>(n_wires - out_total);
    for (size_t i = 1; i < out_arity.size(); i++) {
        OutputGroup g;
        g.name = "output_" + std::to_string(i - 1);
        g.first = opos;
        g.count = static_cast<uint32_t>(out_arity[i]);
        opos += g.count;
        c.outputs.push_back(std::move(g));
    }

    c.gates.reserve(n_gates);
    for (uint64_t i = 0; i < n_gates; i++) {
        if (!rd.next(line))
            throw ParseError("expected " + std::to_string(n_gates) + " gates, got " +
                                 std::to_string(i),
                             rd.line_no);
        std::istringstream in(line);
        uint64_t fanin = 0, fanout = 0;
        if (!(in >> fanin >> fanout) || fanout != 1)
            throw ParseError("bad gate header", rd.line_no);
        Gate g{};
        std::string op;
        if (fanin == 2) {
            uint64_t a, b, o;
            if (!(in >> a >> b >> o >> op)) throw ParseError("truncated gate line", rd.line_no);
            g.in0 = static_cast<uint32_t>(a);
            g.in1 = static_cast<uint32_t>(b);
            g.out = static_cast<uint32_t>(o);
            if (op == "XOR")
                g.kind = GateKind::Xor;
            else if (op == "AND")
                g.kind = GateKind::And;
            else
                throw ParseError("unknown two-input gate '" + op + "'", rd.line_no);
        } else if (fanin == 1) {
            uint64_t a, o;
            if (!(in >> a >> o >> op)) throw ParseError("truncated gate line", rd.line_no);
            if (op != "INV") throw ParseError("unknown one-input gate '" + op + "'", rd.line_no);
            g.kind = GateKind::Not;
            g.in0 = static_cast<uint32_t>(a);
            g.in1 = 0;
            g.out = static_cast<uint32_t>(o);
        } else {
            throw ParseError("unsupported gate fan-in", rd.line_no);
        }
        if (g.out >= n_wires || g.in0 >= n_wires || g.in1 >= n_wires)
            throw ParseError("wire index out of range", rd.line_no);
        if (g.in0 >= g.out || (g.kind != GateKind::Not && g.in1 >= g.out))
            throw ParseError("gate reads a wire not written yet", rd.line_no);
        c.gates.push_back(g);
    }
    if (rd.next(line)) throw ParseError("trailing content after last gate", rd.line_no);

    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("inconsistent circuit: ") + e.what(), rd.line_no);
    }
    return c;
}

Circuit load_bristol_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open circuit file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_bristol(buf.str());
}

void save_bristol_file(const Circuit& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write circuit file: " + path);
    out << to_bristol(c);
}

}  // namespace skyveil
