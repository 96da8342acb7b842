#ifndef SKYVEIL_CHANNEL_HPP
#define SKYVEIL_CHANNEL_HPP

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "skyveil/errors.hpp"

namespace skyveil {

// One session message: 4-byte little-endian length (covering everything
// after the length field), 1-byte type, 8-byte session id, payload.
struct Frame {
    uint8_t type = 0;
    uint64_t session_id = 0;
    std::vector<uint8_t> payload;
};

constexpr uint32_t kMaxFramePayload = 64u << 20;

class Channel {
public:
    virtual ~Channel() = default;

    virtual void send(const Frame& f);
    virtual Frame recv();
    // recv() + type check. An ERROR frame raises ProtocolError (CheatDetected
    // for the cheat reason code); any other type mismatch raises too.
    Frame expect(uint8_t type);

    void send_error(uint64_t session_id, uint16_t code, const std::string& reason);

    virtual uint64_t bytes_sent() const { return bytes_sent_; }
    virtual uint64_t bytes_received() const { return bytes_received_; }
    virtual void set_recv_timeout_ms(int) {}

protected:
    virtual void write_all(const uint8_t* data, size_t n) = 0;
    virtual void read_all(uint8_t* data, size_t n) = 0;

private:
    uint64_t bytes_sent_ = 0;
    uint64_t bytes_received_ = 0;
};

// In-process bidirectional pair for tests and benchmarks.
std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_mem_pair();

class TcpChannel : public Channel {
public:
    explicit TcpChannel(int fd);
    ~TcpChannel() override;
    TcpChannel(const TcpChannel&) = delete;
    TcpChannel& operator=(const TcpChannel&) = delete;

    static std::unique_ptr<TcpChannel> connect(const std::string& host, uint16_t port);
    void set_recv_timeout_ms(int ms) override;
    int fd() const { return fd_; }

protected:
    void write_all(const uint8_t* data, size_t n) override;
    void read_all(uint8_t* data, size_t n) override;

private:
    int fd_;
};

class TcpListener {
public:
    TcpListener(const std::string& host, uint16_t port);
    ~TcpListener();
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    uint16_t port() const { return port_; }
    // Blocks up to timeout_ms (-1 = forever); nullptr on timeout.
    std::unique_ptr<TcpChannel> accept(int timeout_ms = -1);
    void close();

private:
    int fd_;
    uint16_t port_;
};

// Test harness wrapper: the hook sees every outgoing frame before it goes
// out and may modify it in place. Receive side is untouched.
class TamperChannel : public Channel {
public:
    using Hook = std::function<void(Frame&)>;
    TamperChannel(std::unique_ptr<Channel> inner, Hook on_send)
        : inner_(std::move(inner)), hook_(std::move(on_send)) {}

    void send(const Frame& f) override;
    Frame recv() override { return inner_->recv(); }
    uint64_t bytes_sent() const override { return inner_->bytes_sent(); }
    uint64_t bytes_received() const override { return inner_->bytes_received(); }
    void set_recv_timeout_ms(int ms) override { inner_->set_recv_timeout_ms(ms); }

protected:
    void write_all(const uint8_t*, size_t) override;
    void read_all(uint8_t*, size_t) override;

private:
    std::unique_ptr<Channel> inner_;
    Hook hook_;
};

// Transport encryption for defense in depth: an unauthenticated ephemeral
// key exchange, then every chunk travels as a secretbox record with a
// per-direction counter nonce. Byte counters report plaintext sizes.
class SecureChannel : public Channel {
public:
    SecureChannel(std::unique_ptr<Channel> inner, bool is_initiator);

    void set_recv_timeout_ms(int ms) override { inner_->set_recv_timeout_ms(ms); }

protected:
    void write_all(const uint8_t* data, size_t n) override;
    void read_all(uint8_t* data, size_t n) override;

private:
    std::unique_ptr<Channel> inner_;
    std::vector<uint8_t> tx_key_, rx_key_;
    uint64_t tx_counter_ = 0, rx_counter_ = 0;
    std::deque<uint8_t> rx_buf_;
};

}  // namespace skyveil

#endif
