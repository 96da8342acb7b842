#include "skyveil/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include <sodium.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include "skyveil/messages.hpp"
#include "skyveil/wire.hpp"

namespace skyveil {

namespace msg {
const char* name(uint8_t type) {
    switch (type) {
        case HELLO: return "HELLO";
        case CONFIG: return "CONFIG";
        case CFG_ACK: return "CFG_ACK";
        case OT_S1: return "OT_S1";
        case OT_R1: return "OT_R1";
        case OT_S2: return "OT_S2";
        case TRIPLE_BLOCK: return "TRIPLE_BLOCK";
        case INPUT_SHARE: return "INPUT_SHARE";
        case OPEN_BATCH: return "OPEN_BATCH";
        case MAC_CHECK: return "MAC_CHECK";
        case OUTPUT_SHARE: return "OUTPUT_SHARE";
        case TRIPLE_REQ: return "TRIPLE_REQ";
        case TRACK_START: return "TRACK_START";
        case ZK_INIT: return "ZK_INIT";
        case ZK_COT: return "ZK_COT";
        case ZK_TRIPLES: return "ZK_TRIPLES";
        case ZK_OPEN_BATCH: return "ZK_OPEN_BATCH";
        case ZK_FINAL: return "ZK_FINAL";
        case ZK_VERDICT: return "ZK_VERDICT";
        case ZK_COIN: return "ZK_COIN";
        case BOUNDS_UPDATE: return "BOUNDS_UPDATE";
        case BOUNDS_ACK: return "BOUNDS_ACK";
        case ALERT: return "ALERT";
        case ERROR: return "ERROR";
        default: return "UNKNOWN";
    }
}
}  // namespace msg

void Channel::send(const Frame& f) {
    if (f.payload.size() > kMaxFramePayload) throw ProtocolError("frame payload too large");
    Writer w;
    w.u32(static_cast<uint32_t>(9 + f.payload.size()));
    w.u8(f.type);
    w.u64(f.session_id);
    w.bytes(f.payload);
    auto buf = w.take();
    write_all(buf.data(), buf.size());
    bytes_sent_ += buf.size();
}

Frame Channel::recv() {
    uint8_t head[4];
    read_all(head, 4);
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= static_cast<uint32_t>(head[i]) << (8 * i);
    if (len < 9 || len > 9 + static_cast<uint64_t>(kMaxFramePayload))
        throw ProtocolError("bad frame length");
    std::vector<uint8_t> body(len);
    read_all(body.data(), body.size());
    bytes_received_ += 4 + body.size();
    Frame f;
    Reader r(body);
    f.type = r.u8();
    f.session_id = r.u64();
    f.payload = r.raw(len - 9);
    return f;
}

Frame Channel::expect(uint8_t type) {
    Frame f = recv();
    if (f.type == type) return f;
    if (f.type == msg::ERROR) {
        Reader r(f.payload);
        uint16_t code = r.u16();
        std::string reason = r.str();
        std::string text = "peer error " + std::to_string(code) + ": " + reason;
        if (code == errcode::CHEAT) throw CheatDetected(text);
        throw ProtocolError(text);
    }
    throw ProtocolError(std::string("expected ") + msg::name(type) + ", got " +
                        msg::name(f.type));
}

void Channel::send_error(uint64_t session_id, uint16_t code, const std::string& reason) {
    Writer w;
    w.u16(code);
    w.str(reason);
    send(Frame{msg::ERROR, session_id, w.take()});
}

// ---------------------------------------------------------------------------
// In-memory pair

namespace {

struct MemPipe {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<uint8_t> data;
    bool closed = false;
};

class MemChannel final : public Channel {
public:
    MemChannel(std::shared_ptr<MemPipe> tx, std::shared_ptr<MemPipe> rx)
        : tx_(std::move(tx)), rx_(std::move(rx)) {}

    ~MemChannel() override {
        for (auto* p : {tx_.get(), rx_.get()}) {
            std::lock_guard<std::mutex> lk(p->mu);
            p->closed = true;
            p->cv.notify_all();
        }
    }

    void set_recv_timeout_ms(int ms) override { timeout_ms_ = ms; }

protected:
    void write_all(const uint8_t* data, size_t n) override {
        std::lock_guard<std::mutex> lk(tx_->mu);
        if (tx_->closed) throw ChannelClosed("peer closed");
        tx_->data.insert(tx_->data.end(), data, data + n);
        tx_->cv.notify_all();
    }

    void read_all(uint8_t* data, size_t n) override {
        std::unique_lock<std::mutex> lk(rx_->mu);
        auto ready = [&] { return rx_->data.size() >= n || rx_->closed; };
        if (timeout_ms_ < 0) {
            rx_->cv.wait(lk, ready);
        } else if (!rx_->cv.wait_for(lk, std::chrono::milliseconds(timeout_ms_), ready)) {
            throw ChannelTimeout("receive timed out");
        }
        if (rx_->data.size() < n) throw ChannelClosed("peer closed");
        std::copy_n(rx_->data.begin(), n, data);
        rx_->data.erase(rx_->data.begin(), rx_->data.begin() + static_cast<ptrdiff_t>(n));
    }

private:
    std::shared_ptr<MemPipe> tx_, rx_;
    int timeout_ms_ = -1;
};

}  // namespace

std::pair<std::unique_ptr<Channel>, std::unique_ptr<Channel>> make_mem_pair() {
    auto a2b = std::make_shared<MemPipe>();
    auto b2a = std::make_shared<MemPipe>();
    return {std::make_unique<MemChannel>(a2b, b2a), std::make_unique<MemChannel>(b2a, a2b)};
}

// ---------------------------------------------------------------------------
// TCP

TcpChannel::TcpChannel(int fd) : fd_(fd) {
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpChannel::~TcpChannel() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpChannel> TcpChannel::connect(const std::string& host, uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    int rc = ::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res);
    if (rc != 0) throw ChannelClosed("resolve " + host + ": " + gai_strerror(rc));
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0)
        throw ChannelClosed("connect " + host + ":" + std::to_string(port) + ": " +
                            std::strerror(errno));
    return std::make_unique<TcpChannel>(fd);
}

void TcpChannel::set_recv_timeout_ms(int ms) {
    timeval tv{};
    if (ms > 0) {
        tv.tv_sec = ms / 1000;
        tv.tv_usec = (ms % 1000) * 1000;
    }
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
}

void TcpChannel::write_all(const uint8_t* data, size_t n) {
    while (n > 0) {
        ssize_t w = ::send(fd_, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            throw ChannelClosed(std::string("send: ") + std::strerror(errno));
        }
        data += w;
        n -= static_cast<size_t>(w);
    }
}

void TcpChannel::read_all(uint8_t* data, size_t n) {
    while (n > 0) {
        ssize_t r = ::recv(fd_, data, n, 0);
        if (r == 0) throw ChannelClosed("peer closed connection");
        if (r < 0) {
            if (errno == EINTR) continue;
            if (errno == EAGAIN || errno == EWOULDBLOCK)
                throw ChannelTimeout("receive timed out");
            throw ChannelClosed(std::string("recv: ") + std::strerror(errno));
        }
        data += r;
        n -= static_cast<size_t>(r);
    }
}

TcpListener::TcpListener(const std::string& host, uint16_t port) : fd_(-1), port_(0) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ChannelClosed(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host.empty() || host == "0.0.0.0") {
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
    } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw ChannelClosed("bad listen address: " + host);
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 ||
        ::listen(fd_, 64) < 0) {
        int err = errno;
        ::close(fd_);
        throw ChannelClosed(std::string("bind/listen: ") + std::strerror(err));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::unique_ptr<TcpChannel> TcpListener::accept(int timeout_ms) {
    if (fd_ < 0) throw ChannelClosed("listener closed");
    pollfd pfd{fd_, POLLIN, 0};
    for (;;) {
        int rc = ::poll(&pfd, 1, timeout_ms);
        if (rc == 0) return nullptr;
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw ChannelClosed(std::string("poll: ") + std::strerror(errno));
        }
        break;
    }
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) throw ChannelClosed(std::string("accept: ") + std::strerror(errno));
    return std::make_unique<TcpChannel>(cfd);
}

// ---------------------------------------------------------------------------
// Tamper wrapper

void TamperChannel::send(const Frame& f) {
    Frame copy = f;
    if (hook_) hook_(copy);
    inner_->send(copy);
}

void TamperChannel::write_all(const uint8_t*, size_t) {
    throw std::logic_error("TamperChannel forwards whole frames");
}

void TamperChannel::read_all(uint8_t*, size_t) {
    throw std::logic_error("TamperChannel forwards whole frames");
}

// ---------------------------------------------------------------------------
// Encrypted transport

namespace {
// Raw byte records on the inner channel, tagged so they never collide with
// session frame types.
constexpr uint8_t kSecHandshake = 0x70;
constexpr uint8_t kSecRecord = 0x71;
}  // namespace

SecureChannel::SecureChannel(std::unique_ptr<Channel> inner, bool is_initiator)
    : inner_(std::move(inner)) {
    if (sodium_init() < 0) throw Error("libsodium init failed");
    unsigned char pk[crypto_kx_PUBLICKEYBYTES], sk[crypto_kx_SECRETKEYBYTES];
    crypto_kx_keypair(pk, sk);
    inner_->send(Frame{kSecHandshake, 0, std::vector<uint8_t>(pk, pk + sizeof pk)});
    Frame peer = inner_->recv();
    if (peer.type != kSecHandshake || peer.payload.size() != crypto_kx_PUBLICKEYBYTES)
        throw ProtocolError("bad key-exchange message");
    tx_key_.resize(crypto_kx_SESSIONKEYBYTES);
    rx_key_.resize(crypto_kx_SESSIONKEYBYTES);
    int rc = is_initiator
                 ? crypto_kx_client_session_keys(rx_key_.data(), tx_key_.data(), pk, sk,
                                                 peer.payload.data())
                 : crypto_kx_server_session_keys(rx_key_.data(), tx_key_.data(), pk, sk,
                                                 peer.payload.data());
    if (rc != 0) throw ProtocolError("key exchange failed");
    sodium_memzero(sk, sizeof sk);
}

void SecureChannel::write_all(const uint8_t* data, size_t n) {
    unsigned char nonce[crypto_secretbox_NONCEBYTES] = {};
    for (int i = 0; i < 8; ++i) nonce[i] = static_cast<uint8_t>(tx_counter_ >> (8 * i));
    ++tx_counter_;
    std::vector<uint8_t> ct(n + crypto_secretbox_MACBYTES);
    crypto_secretbox_easy(ct.data(), data, n, nonce, tx_key_.data());
    inner_->send(Frame{kSecRecord, 0, std::move(ct)});
}

void SecureChannel::read_all(uint8_t* data, size_t n) {
    while (rx_buf_.size() < n) {
        Frame f = inner_->recv();
        if (f.type != kSecRecord || f.payload.size() < crypto_secretbox_MACBYTES)
            throw ProtocolError("bad encrypted record");
        unsigned char nonce[crypto_secretbox_NONCEBYTES] = {};
        for (int i = 0; i < 8; ++i) nonce[i] = static_cast<uint8_t>(rx_counter_ >> (8 * i));
        ++rx_counter_;
        std::vector<uint8_t> pt(f.payload.size() - crypto_secretbox_MACBYTES);
        if (crypto_secretbox_open_easy(pt.data(), f.payload.data(), f.payload.size(), nonce,
                                       rx_key_.data()) != 0)
            throw ProtocolError("record decryption failed");
        rx_buf_.insert(rx_buf_.end(), pt.begin(), pt.end());
    }
    std::copy_n(rx_buf_.begin(), n, data);
    rx_buf_.erase(rx_buf_.begin(), rx_buf_.begin() + static_cast<ptrdiff_t>(n));
}

}  // namespace skyveil
