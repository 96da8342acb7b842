#include "skyveil/rng.hpp"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

namespace skyveil {

namespace {
void ensure_sodium() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium init failed");
}
}  // namespace

Rng::Rng(const std::array<uint8_t, 32>& key) : key_(key), pos_(buf_.size()), block_(0) {}

Rng Rng::system() {
    ensure_sodium();
    std::array<uint8_t, 32> key;
    randombytes_buf(key.data(), key.size());
    return Rng(key);
}

Rng Rng::seeded(uint64_t seed) {
    ensure_sodium();
    std::array<uint8_t, 32> key{};
    for (int i = 0; i < 8; i++) key[i] = uint8_t(seed >> (8 * i));
    key[8] = 0x5e;  // domain separator vs. all-zero system keys
    return Rng(key);
}

void Rng::refill() {
    uint8_t nonce[8];
    for (int i = 0; i < 8; i++) nonce[i] = uint8_t(block_ >> (8 * i));
    std::memset(buf_.data(), 0, buf_.size());
    crypto_stream_chacha20_xor(buf_.data(), buf_.data(), buf_.size(), nonce, key_.data());
    block_++;
    pos_ = 0;
}

void Rng::fill(std::span<uint8_t> out) {
    size_t off = 0;
    while (off < out.size()) {
        if (pos_ == buf_.size()) refill();
        size_t n = std::min(out.size() - off, buf_.size() - pos_);
        std::memcpy(out.data() + off, buf_.data() + pos_, n);
        pos_ += n;
        off += n;
    }
}

uint8_t Rng::bit() { return u64() & 1; }

uint64_t Rng::u64() {
    uint8_t b[8];
    fill(b);
    uint64_t v = 0;
    for (int i = 0; i < 8; i++) v |= uint64_t(b[i]) << (8 * i);
    return v;
}

uint64_t Rng::below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below(0)");
    // rejection sampling to stay unbiased
    uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = u64();
    } while (v >= lim);
    return v % n;
}

std::vector<uint8_t> Rng::bytes(size_t n) {
    std::vector<uint8_t> v(n);
    fill(v);
    return v;
}

}  // namespace skyveil
