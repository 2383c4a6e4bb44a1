#pragma once

// Newline-delimited messages over blocking TCP sockets.

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace dtwin {

class LineConnection {
public:
    explicit LineConnection(int fd) : fd_(fd) {}
    LineConnection(const LineConnection&) = delete;
    LineConnection& operator=(const LineConnection&) = delete;
    ~LineConnection();

    /// nullptr if the connection cannot be established within the timeout.
    static std::unique_ptr<LineConnection> connect(const std::string& host, std::uint16_t port, double timeout_s);

    /// Thread-safe. Appends the newline. Returns false once the peer is gone.
    bool send_line(const std::string& line);

    enum class Read { line, timeout, closed, overflow };
    /// Waits up to timeout_s (negative means forever) for one complete line.
    Read read_line(std::string& out, double timeout_s);

    /// Wakes a blocked reader and makes further sends fail.
    void shutdown();

    static constexpr std::size_t kMaxLine = 64 * 1024 * 1024;

private:
    int fd_;
    std::string buf_;
    std::mutex write_mu_;
};

class LineListener {
public:
    /// Throws std::runtime_error when the address cannot be bound.
    LineListener(const std::string& host, std::uint16_t port);
    ~LineListener();
    LineListener(const LineListener&) = delete;
    LineListener& operator=(const LineListener&) = delete;

    std::uint16_t port() const { return port_; }

    /// nullptr on timeout or after close().
    std::unique_ptr<LineConnection> accept(double timeout_s);
    void close();

private:
    int fd_;
    std::uint16_t port_;
};

}  // namespace dtwin
