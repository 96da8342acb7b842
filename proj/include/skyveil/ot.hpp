#ifndef SKYVEIL_OT_HPP
#define SKYVEIL_OT_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "skyveil/channel.hpp"
#include "skyveil/gf128.hpp"
#include "skyveil/rng.hpp"

namespace skyveil {

// Wire identifier for the group both peers must agree on.
constexpr uint8_t kGroupRistretto255 = 0x01;

struct OtPair {
    std::vector<uint8_t> m0, m1;  // equal length
};

// 1-out-of-2 oblivious transfer, Diffie-Hellman style: the sender publishes
// A = aG once per batch; per instance the receiver replies B = bG + choice*A
// and each side hashes the shared point (bound to session id and instance
// index) into a one-time pad. The receiver can decrypt exactly one message;
// the sender learns nothing about the choice bits.
//
// Both calls block until their side of the three-message exchange completes,
// so the two parties must run them concurrently on the same channel.
void ot_send(Channel& ch, uint64_t session_id, std::span<const OtPair> pairs);
std::vector<std::vector<uint8_t>> ot_recv(Channel& ch, uint64_t session_id,
                                          std::span<const uint8_t> choices);

// Correlated variant: the sender walks away with fresh uniform keys K_i, the
// receiver with tags M_i = K_i xor (choice_i * delta). Built as ot_send with
// message pairs (K, K xor delta).
std::vector<GF128> cot_send(Channel& ch, uint64_t session_id, const GF128& delta,
                            size_t count, Rng& rng);
std::vector<GF128> cot_recv(Channel& ch, uint64_t session_id,
                            std::span<const uint8_t> choices);

}  // namespace skyveil

#endif
