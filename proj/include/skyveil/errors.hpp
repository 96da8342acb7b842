#ifndef SKYVEIL_ERRORS_HPP
#define SKYVEIL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace skyveil {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad flags, config files, or handshake disagreement.
struct ConfigError : Error {
    using Error::Error;
};

// Peer sent something the protocol does not allow.
struct ProtocolError : Error {
    using Error::Error;
};

// A MAC or consistency check failed: the peer actively deviated.
struct CheatDetected : ProtocolError {
    using ProtocolError::ProtocolError;
};

// Orderly or abrupt loss of the underlying channel.
struct ChannelClosed : ProtocolError {
    using ProtocolError::ProtocolError;
};

struct ChannelTimeout : ProtocolError {
    using ProtocolError::ProtocolError;
};

// Malformed text input (Bristol files, CSV, config). Carries a 1-based line.
struct ParseError : Error {
    int line;
    ParseError(const std::string& what, int line_)
        : Error(what + " (line " + std::to_string(line_) + ")"), line(line_) {}
};

}  // namespace skyveil

#endif
