#pragma once

// Blocking TCP byte streams (POSIX sockets) and message framing over them.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "tdx/protocol.hpp"

namespace tdx {

class ByteStream {
public:
    virtual ~ByteStream() = default;
    /// Reads up to n bytes; returns 0 on orderly end of stream.
    virtual size_t read_some(uint8_t* dst, size_t n) = 0;
    virtual void write_all(std::span<const uint8_t> data) = 0;
    virtual void close() {}

    /// False when the stream ended before the first byte.
    bool read_exact(uint8_t* dst, size_t n) {
        size_t got = 0;
        while (got < n) {
            const size_t k = read_some(dst + got, n - got);
            if (k == 0) {
                if (got == 0) return false;
                throw ProtocolError("connection closed mid-message");
            }
            got += k;
        }
        return true;
    }
};

struct Endpoint {
    std::string host = "127.0.0.1";
    uint16_t port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
};

/// "host:port" or ":port" or "port".
inline Endpoint parse_endpoint(std::string_view s) {
    Endpoint e;
    const auto colon = s.rfind(':');
    std::string_view port = s;
    if (colon != std::string_view::npos) {
        if (colon > 0) e.host = std::string(s.substr(0, colon));
        port = s.substr(colon + 1);
    }
    if (port.empty() || port.size() > 5 || port.find_first_not_of("0123456789") != std::string_view::npos)
        throw FormatError("endpoint: bad port in '" + std::string(s) + "'");
    const unsigned long p = std::stoul(std::string(port));
    if (p > 65535) throw FormatError("endpoint: port out of range");
    e.port = static_cast<uint16_t>(p);
    return e;
}

/// Applies an environment override (TDX_BIND / TDX_CONNECT) when set.
inline Endpoint endpoint_from(std::string_view flag, const char* env_var) {
    if (const char* v = std::getenv(env_var); v && *v) return parse_endpoint(v);
    return parse_endpoint(flag);
}

namespace detail {

[[noreturn]] inline void sys_fail(const std::string& what) { throw ProtocolError(what + ": " + std::strerror(errno)); }

inline sockaddr_in resolve(const Endpoint& e) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || !res) throw ProtocolError("cannot resolve host " + e.host);
    sockaddr_in a{};
    std::memcpy(&a, res->ai_addr, sizeof a);
    freeaddrinfo(res);
    a.sin_port = htons(e.port);
    return a;
}

} // namespace detail

class TcpStream : public ByteStream {
public:
    explicit TcpStream(int fd) : fd_(fd) {
        const int one = 1;
        setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;
    ~TcpStream() override { close(); }

    static std::unique_ptr<TcpStream> connect(const Endpoint& e) {
        const auto addr = detail::resolve(e);
        const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) detail::sys_fail("socket");
        if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
            const int err = errno;
            ::close(fd);
            errno = err;
            detail::sys_fail("connect " + e.str());
        }
        return std::make_unique<TcpStream>(fd);
    }

    size_t read_some(uint8_t* dst, size_t n) override {
        for (;;) {
            const ssize_t k = ::recv(fd_, dst, n, 0);
            if (k >= 0) return static_cast<size_t>(k);
            if (errno == EINTR) continue;
            if (errno == ECONNRESET) return 0;
            detail::sys_fail("recv");
        }
    }
    void write_all(std::span<const uint8_t> data) override {
        size_t off = 0;
        while (off < data.size()) {
            const ssize_t k = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (k < 0) {
                if (errno == EINTR) continue;
                detail::sys_fail("send");
            }
            off += static_cast<size_t>(k);
        }
    }
    void close() override {
        std::lock_guard lk(m_);
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }
    /// Unblocks a reader in another thread without releasing the descriptor.
    void shutdown() {
        std::lock_guard lk(m_);
        if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    }

private:
    std::mutex m_;
    int fd_ = -1;
};

class TcpListener {
public:
    explicit TcpListener(const Endpoint& e) {
        const auto addr = detail::resolve(e);
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) detail::sys_fail("socket");
        const int one = 1;
        setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) detail::sys_fail("bind " + e.str());
        if (::listen(fd_, 64) != 0) detail::sys_fail("listen");
        sockaddr_in bound{};
        socklen_t len = sizeof bound;
        getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = ntohs(bound.sin_port);
    }
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;
    ~TcpListener() { close(); }

    uint16_t port() const { return port_; }

    /// nullptr once the listener has been closed.
    std::unique_ptr<TcpStream> accept() {
        for (;;) {
            const int fd = ::accept(fd_, nullptr, nullptr);
            if (fd >= 0) return std::make_unique<TcpStream>(fd);
            if (errno == EINTR || errno == ECONNABORTED) continue;
            return nullptr;
        }
    }
    /// Makes a blocked accept() return nullptr; the descriptor is released by close().
    void shutdown() {
        std::lock_guard lk(m_);
        if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    }
    void close() {
        std::lock_guard lk(m_);
        if (fd_ >= 0) {
            ::shutdown(fd_, SHUT_RDWR);
            ::close(fd_);
            fd_ = -1;
        }
    }

private:
    std::mutex m_;
    int fd_ = -1;
    uint16_t port_ = 0;
};

/// Records every byte crossing a stream, in both directions.
class CapturingStream : public ByteStream {
public:
    explicit CapturingStream(ByteStream& inner) : inner_(inner) {}

    size_t read_some(uint8_t* dst, size_t n) override {
        const size_t k = inner_.read_some(dst, n);
        received_.insert(received_.end(), dst, dst + k);
        return k;
    }
    void write_all(std::span<const uint8_t> data) override {
        sent_.insert(sent_.end(), data.begin(), data.end());
        inner_.write_all(data);
    }
    void close() override { inner_.close(); }

    const Bytes& sent() const { return sent_; }
    const Bytes& received() const { return received_; }

private:
    ByteStream& inner_;
    Bytes sent_, received_;
};

inline void send_message(ByteStream& s, const Message& m) { s.write_all(encode_message(m)); }

/// Next message, or nullopt on a clean end of stream. The header is
/// validated before the payload is read, so oversized frames are refused
/// without buffering them.
inline std::optional<Message> recv_message(ByteStream& s) {
    uint8_t h[kHeaderSize];
    if (!s.read_exact(h, kHeaderSize)) return std::nullopt;
    const Header hd = decode_header(h);
    Bytes payload(hd.length);
    if (hd.length && !s.read_exact(payload.data(), hd.length)) throw ProtocolError("connection closed mid-message");
    return decode_payload(hd.type, payload);
}

} // namespace tdx
