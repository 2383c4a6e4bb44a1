#pragma once

#include "dtwin/engine.hpp"

#include <cstdio>
#include <string>
#include <vector>

namespace dtwin {

/// Append-only JSON-lines event log with a periodic engine snapshot written
/// next to it (`<path>.snapshot`).
class EventLog {
public:
    static constexpr std::uint64_t kSnapshotInterval = 500;

    /// Opens (creating if needed) the log for appending.
    explicit EventLog(std::string path);
    ~EventLog();
    EventLog(const EventLog&) = delete;
    EventLog& operator=(const EventLog&) = delete;

    /// Writes and flushes one line. Every kSnapshotInterval events the
    /// engine snapshot is rewritten atomically.
    void append(const Event& e, const Engine& engine);

    const std::string& path() const { return path_; }
    std::string snapshot_path() const { return path_ + ".snapshot"; }

    /// Complete lines of an existing log. A torn final line is dropped.
    static std::vector<Event> read(const std::string& path);

    /// Rebuilds an engine from the snapshot (if any) plus later events.
    /// Returns false when there is no log to recover from.
    static bool recover(const std::string& path, const EngineConfig& cfg, Engine& out, std::vector<Event>& events);

private:
    std::string path_;
    std::FILE* file_ = nullptr;
};

}  // namespace dtwin
