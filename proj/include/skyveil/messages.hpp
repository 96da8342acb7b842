#ifndef SKYVEIL_MESSAGES_HPP
#define SKYVEIL_MESSAGES_HPP

#include <cstdint>

namespace skyveil {

// Frame type registry. Ranges: 0x10-0x1F oblivious transfer, 0x20-0x2F
// secure computation, 0x30-0x3F zero-knowledge, 0x40+ fleet control.
namespace msg {
constexpr uint8_t HELLO = 0x01;
constexpr uint8_t CONFIG = 0x02;
constexpr uint8_t CFG_ACK = 0x03;

constexpr uint8_t OT_S1 = 0x10;  // sender commitment A
constexpr uint8_t OT_R1 = 0x11;  // receiver elements B (batched)
constexpr uint8_t OT_S2 = 0x12;  // ciphertext pairs

constexpr uint8_t TRIPLE_BLOCK = 0x20;
constexpr uint8_t INPUT_SHARE = 0x21;
constexpr uint8_t OPEN_BATCH = 0x22;
constexpr uint8_t MAC_CHECK = 0x23;
constexpr uint8_t OUTPUT_SHARE = 0x24;
constexpr uint8_t TRIPLE_REQ = 0x26;
constexpr uint8_t TRACK_START = 0x27;

constexpr uint8_t ZK_INIT = 0x30;
constexpr uint8_t ZK_COT = 0x31;
constexpr uint8_t ZK_TRIPLES = 0x32;
constexpr uint8_t ZK_OPEN_BATCH = 0x33;
constexpr uint8_t ZK_FINAL = 0x34;
constexpr uint8_t ZK_VERDICT = 0x35;
constexpr uint8_t ZK_COIN = 0x36;

constexpr uint8_t BOUNDS_UPDATE = 0x40;
constexpr uint8_t BOUNDS_ACK = 0x41;
constexpr uint8_t ALERT = 0x50;
constexpr uint8_t ERROR = 0x7F;

const char* name(uint8_t type);
}  // namespace msg

// Error frame reason codes (payload: u16 code + string).
namespace errcode {
constexpr uint16_t CFG_MISMATCH = 1;
constexpr uint16_t BOUNDS_INVALID = 2;
constexpr uint16_t CHEAT = 3;
constexpr uint16_t INTERNAL = 4;
constexpr uint16_t QUARANTINED = 5;
}  // namespace errcode

constexpr uint16_t kProtocolVersion = 1;

}  // namespace skyveil

#endif
