#include "dtwin/line_socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <stdexcept>

namespace dtwin {

namespace {

int poll_ms(double timeout_s) {
    if (timeout_s < 0) return -1;
    return static_cast<int>(timeout_s * 1000.0 + 0.5);
}

}  // namespace

LineConnection::~LineConnection() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<LineConnection> LineConnection::connect(const std::string& host, std::uint16_t port,
                                                        double timeout_s) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) return nullptr;
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(res);
        return nullptr;
    }
    const int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
    ::freeaddrinfo(res);
    if (rc != 0 && errno == EINPROGRESS) {
        pollfd p{fd, POLLOUT, 0};
        rc = ::poll(&p, 1, poll_ms(timeout_s)) == 1 ? 0 : -1;
        if (rc == 0) {
            int err = 0;
            socklen_t len = sizeof err;
            ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
            rc = err == 0 ? 0 : -1;
        }
    }
    if (rc != 0) {
        ::close(fd);
        return nullptr;
    }
    ::fcntl(fd, F_SETFL, flags);
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return std::make_unique<LineConnection>(fd);
}

bool LineConnection::send_line(const std::string& line) {
    std::lock_guard lock(write_mu_);
    std::string data = line;
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        off += static_cast<std::size_t>(n);
    }
    return true;
}

LineConnection::Read LineConnection::read_line(std::string& out, double timeout_s) {
    const auto start = std::chrono::steady_clock::now();
    while (true) {
        const auto nl = buf_.find('\n');
        if (nl != std::string::npos) {
            out.assign(buf_, 0, nl);
            if (!out.empty() && out.back() == '\r') out.pop_back();
            buf_.erase(0, nl + 1);
            return Read::line;
        }
        if (buf_.size() > kMaxLine) return Read::overflow;
        double left = timeout_s;
        if (timeout_s >= 0) {
            left = timeout_s - std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (left < 0) left = 0;
        }
        pollfd p{fd_, POLLIN, 0};
        const int rc = ::poll(&p, 1, poll_ms(left));
        if (rc < 0) {
            if (errno == EINTR) continue;
            return Read::closed;
        }
        if (rc == 0) return Read::timeout;
        char chunk[65536];
        const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return Read::closed;
        buf_.append(chunk, static_cast<std::size_t>(n));
    }
}

void LineConnection::shutdown() { ::shutdown(fd_, SHUT_RDWR); }

LineListener::LineListener(const std::string& host, std::uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket: " + std::string(std::strerror(errno)));
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw std::runtime_error("bad listen address '" + host + "'");
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 8) != 0) {
        const std::string err = std::strerror(errno);
        ::close(fd_);
        throw std::runtime_error("cannot bind robot port " + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

LineListener::~LineListener() { close(); }

std::unique_ptr<LineConnection> LineListener::accept(double timeout_s) {
    if (fd_ < 0) return nullptr;
    pollfd p{fd_, POLLIN, 0};
    if (::poll(&p, 1, poll_ms(timeout_s)) != 1 || !(p.revents & POLLIN)) return nullptr;
    const int c = ::accept(fd_, nullptr, nullptr);
    if (c < 0) return nullptr;
    const int one = 1;
    ::setsockopt(c, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return std::make_unique<LineConnection>(c);
}

void LineListener::close() {
    if (fd_ >= 0) {
        ::shutdown(fd_, SHUT_RDWR);
        ::close(fd_);
        fd_ = -1;
    }
}

}  // namespace dtwin
