#include "skyveil/wire.hpp"

#include <cstring>

namespace skyveil {

std::vector<uint8_t> pack_bits(std::span<const uint8_t> bits) {
    std::vector<uint8_t> out((bits.size() + 7) / 8, 0);
    for (size_t i = 0; i < bits.size(); ++i)
        out[i / 8] = static_cast<uint8_t>(out[i / 8] | ((bits[i] & 1u) << (i % 8)));
    return out;
}

std::vector<uint8_t> unpack_bits(std::span<const uint8_t> bytes, size_t n_bits) {
    if (bytes.size() != (n_bits + 7) / 8)
        throw ProtocolError("packed bit vector has wrong byte length");
    std::vector<uint8_t> out(n_bits);
    for (size_t i = 0; i < n_bits; ++i) out[i] = (bytes[i / 8] >> (i % 8)) & 1u;
    return out;
}

void Writer::u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v));
    buf_.push_back(static_cast<uint8_t>(v >> 8));
}

void Writer::u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void Writer::u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void Writer::gf(const GF128& v) {
    auto b = v.to_bytes();
    bytes(std::span<const uint8_t>(b.data(), b.size()));
}

void Writer::blob(std::span<const uint8_t> b) {
    u32(static_cast<uint32_t>(b.size()));
    bytes(b);
}

void Writer::str(std::string_view s) {
    u32(static_cast<uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
}

void Writer::bits(std::span<const uint8_t> bits_in) {
    u32(static_cast<uint32_t>(bits_in.size()));
    bytes(pack_bits(bits_in));
}

void Reader::need(size_t n) const {
    if (remaining() < n) throw ProtocolError("truncated message");
}

uint8_t Reader::u8() {
    need(1);
    return d_[pos_++];
}

uint16_t Reader::u16() {
    need(2);
    uint16_t v = static_cast<uint16_t>(d_[pos_] | (d_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
}

uint32_t Reader::u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(d_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
}

uint64_t Reader::u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(d_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
}

GF128 Reader::gf() {
    need(16);
    GF128 v = GF128::from_bytes(d_.subspan(pos_, 16));
    pos_ += 16;
    return v;
}

std::vector<uint8_t> Reader::raw(size_t n) {
    need(n);
    std::vector<uint8_t> out(d_.begin() + static_cast<ptrdiff_t>(pos_),
                             d_.begin() + static_cast<ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
}

std::vector<uint8_t> Reader::blob() {
    uint32_t n = u32();
    return raw(n);
}

std::string Reader::str() {
    uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(d_.data() + pos_), n);
    pos_ += n;
    return s;
}

std::vector<uint8_t> Reader::bits() {
    uint32_t n = u32();
    return unpack_bits(raw((n + 7) / 8), n);
}

void Reader::expect_end() const {
    if (remaining() != 0) throw ProtocolError("trailing bytes in message");
}

}  // namespace skyveil
