#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>

namespace tttnn::net {

using Deadline = std::chrono::steady_clock::time_point;

inline Deadline after(std::chrono::milliseconds d) {
    return std::chrono::steady_clock::now() + d;
}

// Move-only owner of a socket fd.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    ~Socket();

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void close();
    // Interrupts any thread blocked on this socket.
    void shutdown_both();

private:
    int fd_ = -1;
};

// Binds and listens on host:port; port 0 picks an ephemeral port.
// Throws std::runtime_error on failure (e.g. port in use).
Socket listen_tcp(const std::string& host, std::uint16_t port);

std::uint16_t local_port(const Socket& listener);

// Waits up to `timeout` for a connection; returns an invalid Socket on
// timeout or listener shutdown.
Socket accept_conn(const Socket& listener, std::chrono::milliseconds timeout);

// Throws std::runtime_error on refusal or timeout.
Socket connect_tcp(const std::string& host, std::uint16_t port, Deadline deadline);

// Splits "host:port". Throws std::invalid_argument on malformed input.
std::pair<std::string, std::uint16_t> split_host_port(const std::string& address);

// Both throw std::runtime_error on error or missed deadline. recv_exact
// returns the bytes received before EOF (== n when the peer kept the
// connection open long enough).
void send_all(int fd, std::string_view data, Deadline deadline);
std::size_t recv_exact(int fd, char* buf, std::size_t n, Deadline deadline);

}  // namespace tttnn::net
