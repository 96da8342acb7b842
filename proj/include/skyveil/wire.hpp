#ifndef SKYVEIL_WIRE_HPP
#define SKYVEIL_WIRE_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skyveil/errors.hpp"
#include "skyveil/gf128.hpp"

namespace skyveil {

// All multi-byte integers little-endian; bit vectors packed LSB-first,
// length-prefixed with a 32-bit bit count.
std::vector<uint8_t> pack_bits(std::span<const uint8_t> bits);
std::vector<uint8_t> unpack_bits(std::span<const uint8_t> bytes, size_t n_bits);

class Writer {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void gf(const GF128& v);
    void bytes(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    // 32-bit length prefix + raw bytes
    void blob(std::span<const uint8_t> b);
    void str(std::string_view s);
    // 32-bit bit count + LSB-first packed bytes
    void bits(std::span<const uint8_t> bits);

    std::vector<uint8_t> take() { return std::move(buf_); }
    size_t size() const { return buf_.size(); }

private:
    std::vector<uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::span<const uint8_t> data) : d_(data) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    GF128 gf();
    std::vector<uint8_t> raw(size_t n);
    std::vector<uint8_t> blob();
    std::string str();
    std::vector<uint8_t> bits();

    size_t remaining() const { return d_.size() - pos_; }
    // Payloads must be fully consumed; trailing bytes indicate a framing bug.
    void expect_end() const;

private:
    void need(size_t n) const;
    std::span<const uint8_t> d_;
    size_t pos_ = 0;
};

}  // namespace skyveil

#endif
