#include "skyveil/hashing.hpp"

#include <cstring>
#include <stdexcept>

namespace skyveil {

namespace {
void ensure_sodium() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
}

void put_u64(std::array<uint8_t, 8>& b, uint64_t v) {
    for (int i = 0; i < 8; i++) b[i] = uint8_t(v >> (8 * i));
}
}  // namespace

Digest32 blake2b256(std::span<const uint8_t> data) {
    ensure_sodium();
    Digest32 out;
    crypto_generichash(out.data(), out.size(), data.data(), data.size(), nullptr, 0);
    return out;
}

Digest32 blake2b256(std::string_view label, std::span<const uint8_t> data) {
    ensure_sodium();
    Digest32 out;
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, out.size());
    crypto_generichash_update(&st, reinterpret_cast<const uint8_t*>(label.data()), label.size());
    uint8_t sep = 0;
    crypto_generichash_update(&st, &sep, 1);
    crypto_generichash_update(&st, data.data(), data.size());
    crypto_generichash_final(&st, out.data(), out.size());
    return out;
}

std::string hex(std::span<const uint8_t> data) {
    static const char* d = "0123456789abcdef";
    std::string s;
    s.reserve(2 * data.size());
    for (uint8_t b : data) {
        s.push_back(d[b >> 4]);
        s.push_back(d[b & 15]);
    }
    return s;
}

Transcript::Transcript(std::string_view label) {
    ensure_sodium();
    crypto_generichash_init(&st_, nullptr, 0, 32);
    crypto_generichash_update(&st_, reinterpret_cast<const uint8_t*>(label.data()), label.size());
}

void Transcript::absorb(uint8_t type, std::span<const uint8_t> payload) {
    std::array<uint8_t, 8> len;
    put_u64(len, payload.size());
    crypto_generichash_update(&st_, &type, 1);
    crypto_generichash_update(&st_, len.data(), len.size());
    crypto_generichash_update(&st_, payload.data(), payload.size());
}

void Transcript::absorb_u64(uint64_t v) {
    std::array<uint8_t, 8> b;
    put_u64(b, v);
    absorb(0xFE, std::span<const uint8_t>(b.data(), b.size()));
}

Digest32 Transcript::digest() const {
    crypto_generichash_state copy = st_;
    Digest32 out;
    crypto_generichash_final(&copy, out.data(), out.size());
    return out;
}

ChiStream::ChiStream(const Digest32& seed, uint8_t direction) : seed_(seed), dir_(direction) {}

GF128 ChiStream::at(uint64_t index) const {
    uint8_t msg[9];
    msg[0] = dir_;
    for (int i = 0; i < 8; i++) msg[1 + i] = uint8_t(index >> (8 * i));
    uint8_t out[16];
    crypto_generichash(out, sizeof out, msg, sizeof msg, seed_.data(), seed_.size());
    return GF128::from_bytes(std::span<const uint8_t>(out, 16));
}

}  // namespace skyveil
