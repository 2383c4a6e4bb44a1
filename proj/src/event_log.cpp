#include "dtwin/event_log.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dtwin {

EventLog::EventLog(std::string path) : path_(std::move(path)) {
    // Drop a torn final line so appends start on a fresh line.
    if (std::filesystem::exists(path_)) {
        std::ifstream in(path_, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        std::string text = ss.str();
        const auto last_nl = text.rfind('\n');
        const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
        if (keep != text.size()) std::filesystem::resize_file(path_, keep);
    }
    file_ = std::fopen(path_.c_str(), "ab");
    if (!file_) throw std::runtime_error("cannot open event log '" + path_ + "'");
}

EventLog::~EventLog() {
    if (file_) std::fclose(file_);
}

void EventLog::append(const Event& e, const Engine& engine) {
    const std::string line = canonical(to_json(e)) + "\n";
    std::fwrite(line.data(), 1, line.size(), file_);
    std::fflush(file_);
    if (e.seq % kSnapshotInterval == 0) {
        const std::string tmp = snapshot_path() + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            out << canonical(engine.snapshot());
        }
        std::filesystem::rename(tmp, snapshot_path());
    }
}

std::vector<Event> EventLog::read(const std::string& path) {
    std::vector<Event> out;
    std::ifstream in(path, std::ios::binary);
    if (!in) return out;
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    std::size_t pos = 0;
    while (true) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string::npos) break;
        const std::string line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        out.push_back(event_from_json(parse_json(line)));
    }
    return out;
}

bool EventLog::recover(const std::string& path, const EngineConfig& cfg, Engine& out, std::vector<Event>& events) {
    events = read(path);
    if (events.empty()) return false;
    Engine engine(cfg);
    const std::string snap = path + ".snapshot";
    if (std::filesystem::exists(snap)) {
        std::ifstream in(snap, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        Engine restored = Engine::from_snapshot(parse_json(ss.str()), cfg);
        if (restored.last_seq() <= events.back().seq) engine = std::move(restored);
    }
    for (const auto& e : events) {
        if (e.seq > engine.last_seq()) engine.apply(e);
    }
    out = std::move(engine);
    return true;
}

}  // namespace dtwin
