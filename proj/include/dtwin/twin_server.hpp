#pragma once

#include "dtwin/engine.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace dtwin {

struct ServerConfig {
    std::string sdl_path;
    std::string host = "127.0.0.1";
    std::uint16_t http_port = 8080;   ///< 0 picks a free port
    std::uint16_t robot_port = 9090;  ///< 0 picks a free port
    std::string log_path = "twin_events.jsonl";
    double heartbeat_timeout = 2.0;
    std::string static_dir;  ///< served at / when set
    EngineConfig engine;
};

/// HTTP API, event stream, robot link and persistence around one Engine.
/// Every engine access is funneled through a single loop thread.
class TwinServer {
public:
    explicit TwinServer(ServerConfig cfg);
    ~TwinServer();
    TwinServer(const TwinServer&) = delete;
    TwinServer& operator=(const TwinServer&) = delete;

    /// Recovers from the event log when it has events, otherwise initializes
    /// from the scene file. Throws std::runtime_error when a port cannot be bound.
    void start();
    /// Stops all threads and flushes the log. Idempotent.
    void stop();

    std::uint16_t http_port() const;
    std::uint16_t robot_port() const;
    bool recovered() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace dtwin
