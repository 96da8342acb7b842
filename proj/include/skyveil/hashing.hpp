#ifndef SKYVEIL_HASHING_HPP
#define SKYVEIL_HASHING_HPP

#include <sodium.h>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skyveil/gf128.hpp"

namespace skyveil {

using Digest32 = std::array<uint8_t, 32>;

Digest32 blake2b256(std::span<const uint8_t> data);
Digest32 blake2b256(std::string_view label, std::span<const uint8_t> data);
std::string hex(std::span<const uint8_t> data);

// Running hash of an ordered protocol transcript. Both peers absorb the same
// events in the same order so the final digest is a joint coin.
class Transcript {
public:
    explicit Transcript(std::string_view label);
    void absorb(uint8_t type, std::span<const uint8_t> payload);
    void absorb_u64(uint64_t v);
    Digest32 digest() const;  // non-destructive

private:
    crypto_generichash_state st_;
};

// Stream of GF(2^128) batch-check coefficients derived from a seed.
class ChiStream {
public:
    explicit ChiStream(const Digest32& seed, uint8_t direction = 0);
    GF128 at(uint64_t index) const;

private:
    Digest32 seed_;
    uint8_t dir_;
};

}  // namespace skyveil

#endif
