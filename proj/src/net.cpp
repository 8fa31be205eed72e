#include "tttnn/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace tttnn::net {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error(what + ": " + std::strerror(errno));
}

int remaining_ms(Deadline deadline) {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) return 0;
    if (left.count() > 3600000) return 3600000;
    return static_cast<int>(left.count());
}

void wait_ready(int fd, short events, Deadline deadline, const char* what) {
    pollfd pfd{fd, events, 0};
    int ms = remaining_ms(deadline);
    int r = ::poll(&pfd, 1, ms);
    if (r < 0) fail(what);
    if (r == 0) throw std::runtime_error(std::string(what) + ": deadline exceeded");
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host.empty() || host == "0.0.0.0") {
        addr.sin_addr.s_addr = INADDR_ANY;
    } else if (host == "localhost") {
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    } else if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw std::invalid_argument("unsupported host (IPv4 literal or localhost): " + host);
    }
    return addr;
}

}  // namespace

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

Socket::~Socket() { close(); }

void Socket::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void Socket::shutdown_both() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
    }
}

Socket listen_tcp(const std::string& host, std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail("socket");
    Socket sock(fd);

    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr = make_addr(host, port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        fail("bind " + host + ":" + std::to_string(port));
    }
    if (::listen(fd, 64) != 0) {
        fail("listen");
    }
    return sock;
}

std::uint16_t local_port(const Socket& listener) {
    sockaddr_in addr{};
    socklen_t len = sizeof(addr);
    if (getsockname(listener.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        fail("getsockname");
    }
    return ntohs(addr.sin_port);
}

Socket accept_conn(const Socket& listener, std::chrono::milliseconds timeout) {
    pollfd pfd{listener.fd(), POLLIN, 0};
    int r = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (r <= 0) {
        return Socket{};
    }
    int fd = ::accept(listener.fd(), nullptr, nullptr);
    if (fd < 0) {
        return Socket{};
    }
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return Socket(fd);
}

Socket connect_tcp(const std::string& host, std::uint16_t port, Deadline deadline) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) fail("socket");
    Socket sock(fd);

    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);

    sockaddr_in addr = make_addr(host, port);
    int r = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    if (r != 0 && errno != EINPROGRESS) {
        fail("connect " + host + ":" + std::to_string(port));
    }
    if (r != 0) {
        wait_ready(fd, POLLOUT, deadline, "connect");
        int err = 0;
        socklen_t len = sizeof(err);
        if (getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0) {
            errno = err;
            fail("connect " + host + ":" + std::to_string(port));
        }
    }
    fcntl(fd, F_SETFL, flags);
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return sock;
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& address) {
    auto colon = address.rfind(':');
    if (colon == std::string::npos || colon + 1 >= address.size()) {
        throw std::invalid_argument("expected host:port, got: " + address);
    }
    unsigned long port = std::stoul(address.substr(colon + 1));
    if (port == 0 || port > 65535) {
        throw std::invalid_argument("port out of range in: " + address);
    }
    return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
}

void send_all(int fd, std::string_view data, Deadline deadline) {
    std::size_t done = 0;
    while (done < data.size()) {
        ssize_t sent = ::send(fd, data.data() + done, data.size() - done, MSG_NOSIGNAL);
        if (sent > 0) {
            done += static_cast<std::size_t>(sent);
            continue;
        }
        if (sent < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
            wait_ready(fd, POLLOUT, deadline, "send");
            continue;
        }
        if (sent < 0 && errno == EINTR) continue;
        fail("send");
    }
}

std::size_t recv_exact(int fd, char* buf, std::size_t n, Deadline deadline) {
    std::size_t done = 0;
    while (done < n) {
        wait_ready(fd, POLLIN, deadline, "recv");
        ssize_t got = ::recv(fd, buf + done, n - done, 0);
        if (got > 0) {
            done += static_cast<std::size_t>(got);
            continue;
        }
        if (got == 0) {
            return done;  // peer closed
        }
        if (errno == EINTR || errno == EAGAIN || errno == EWOULDBLOCK) continue;
        fail("recv");
    }
    return done;
}

}  // namespace tttnn::net
