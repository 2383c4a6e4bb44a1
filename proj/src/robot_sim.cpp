#include "dtwin/robot_sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <thread>

namespace dtwin {

namespace {

using Clock = std::chrono::steady_clock;

std::optional<int> execution_field(const Json& j) {
    if (!j.contains("execution")) return std::nullopt;
    const int n = j.at("execution").get<int>();
    if (n < 1) throw CodecError("execution counts from 1");
    return n;
}

double at_field(const Json& j) {
    const double t = j.at("at_t").get<double>();
    if (!std::isfinite(t) || t < 0) throw CodecError("at_t must be a non-negative number");
    return t;
}

bool applies(const std::optional<int>& execution, int n) { return !execution || *execution == n; }

}  // namespace

SimScript script_from_json(const Json& j) {
    if (!j.is_object()) throw CodecError("script must be an object");
    SimScript s;
    try {
        for (const auto& f : j.value("failures", Json::array())) {
            ScriptedFailure sf;
            sf.at_t = at_field(f);
            const std::string a = f.at("action").get<std::string>();
            if (a == "abort") sf.action = FailureAction::abort;
            else if (a == "freeze") sf.action = FailureAction::freeze;
            else throw CodecError("unknown failure action '" + a + "'");
            sf.execution = execution_field(f);
            s.failures.push_back(sf);
        }
        for (const auto& i : j.value("interactions", Json::array())) {
            s.interactions.push_back({at_field(i), diff_from_json(i.at("diff")), execution_field(i)});
        }
    } catch (const Json::exception& e) {
        throw CodecError(std::string("bad script: ") + e.what());
    }
    auto by_time = [](const auto& a, const auto& b) { return a.at_t < b.at_t; };
    std::stable_sort(s.failures.begin(), s.failures.end(), by_time);
    std::stable_sort(s.interactions.begin(), s.interactions.end(), by_time);
    return s;
}

void validate(const SimConfig& cfg) {
    if (cfg.dof == 0) throw std::invalid_argument("dof must be positive");
    if (!(cfg.tick_rate > 0) || !std::isfinite(cfg.tick_rate)) throw std::invalid_argument("tick_rate must be positive");
    if (!(cfg.time_scale > 0) || !std::isfinite(cfg.time_scale))
        throw std::invalid_argument("time_scale must be positive");
    if (cfg.initial_q.size() != 0 && static_cast<std::size_t>(cfg.initial_q.size()) != cfg.dof)
        throw std::invalid_argument("initial_q has the wrong length");
}

std::vector<double> playback_times(const SimConfig& cfg, double duration, int execution) {
    std::vector<double> ts;
    const auto n = static_cast<long>(std::floor(duration * cfg.tick_rate));
    for (long k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) / cfg.tick_rate;
        if (t < duration) ts.push_back(t);
    }
    for (const auto& f : cfg.script.failures)
        if (applies(f.execution, execution) && f.at_t <= duration) ts.push_back(f.at_t);
    for (const auto& i : cfg.script.interactions)
        if (applies(i.execution, execution) && i.at_t <= duration) ts.push_back(i.at_t);
    ts.push_back(duration);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

RobotSim::RobotSim(SimConfig cfg, std::string host, std::uint16_t port)
    : cfg_(std::move(cfg)), host_(std::move(host)), port_(port) {
    validate(cfg_);
    q_ = cfg_.initial_q.size() ? cfg_.initial_q : JointConfig::Zero(static_cast<Eigen::Index>(cfg_.dof));
}

void RobotSim::run() {
    double backoff = 0.5;
    while (!stop_) {
        auto c = LineConnection::connect(host_, port_, 1.0);
        if (c && serve(*c)) backoff = 0.5;
        if (stop_) break;
        const auto until = Clock::now() + std::chrono::duration<double>(backoff);
        while (!stop_ && Clock::now() < until) std::this_thread::sleep_for(std::chrono::milliseconds(10));
        if (!c) backoff = std::min(2.0, backoff * 2.0);
    }
}

namespace {

struct Playback {
    std::string proposal_id;
    Trajectory traj;
    std::vector<double> times;
    std::size_t next = 0;
    Clock::time_point start;
    int execution = 0;
    std::size_t next_failure = 0;
    std::size_t next_interaction = 0;
};

}  // namespace

bool RobotSim::serve(LineConnection& c) {
    const auto t_start = Clock::now();
    auto since_start = [&] { return std::chrono::duration<double>(Clock::now() - t_start).count(); };
    auto send = [&](const Json& j) { return c.send_line(canonical(j)); };
    auto status = [&](const std::string& pid, const char* st, const std::string& reason = {}) {
        Json j{{"type", "exec_status"}, {"proposal_id", pid}, {"status", st}};
        if (!reason.empty()) j["reason"] = reason;
        return send(j);
    };

    if (!send({{"type", "hello"}, {"robot_id", cfg_.robot_id}, {"dof", cfg_.dof}})) return false;
    std::string line;
    bool acked = false;
    while (!acked && !stop_) {
        const auto r = c.read_line(line, 0.05);
        if (r == LineConnection::Read::timeout) {
            if (since_start() > 5.0) return false;
            continue;
        }
        if (r != LineConnection::Read::line) return false;
        try {
            const Json m = parse_json(line);
            const std::string type = m.at("type").get<std::string>();
            if (type == "hello_ack") acked = true;
            else if (type == "protocol_error") {
                std::cerr << "robot-sim: twin refused handshake: " << m.value("message", "") << "\n";
                return false;
            }
        } catch (const std::exception&) {
            return false;
        }
    }
    if (!acked) return false;

    std::optional<Playback> play;
    bool frozen = false;
    auto next_idle = Clock::now();
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg_.idle_period));

    auto frame_due = [&](const Playback& p) {
        return p.start + std::chrono::duration_cast<Clock::duration>(
                             std::chrono::duration<double>(p.times[p.next] / cfg_.time_scale));
    };

    while (!stop_) {
        const auto now = Clock::now();
        auto wake = now + std::chrono::milliseconds(50);
        if (!frozen) wake = std::min(wake, play ? frame_due(*play) : next_idle);
        const double timeout = std::max(0.0, std::chrono::duration<double>(wake - now).count());

        const auto r = c.read_line(line, timeout);
        if (r == LineConnection::Read::closed || r == LineConnection::Read::overflow) return true;
        if (r == LineConnection::Read::line) {
            if (frozen || line.empty()) continue;
            Json m;
            std::string type;
            try {
                m = parse_json(line);
                type = m.at("type").get<std::string>();
            } catch (const std::exception& e) {
                std::cerr << "robot-sim: malformed frame from twin: " << e.what() << "\n";
                continue;
            }
            if (type == "execute") {
                const std::string pid = m.value("proposal_id", "");
                if (play && !status(play->proposal_id, "aborted", "superseded by a new execute")) return true;
                play.reset();
                ++executions_;
                Trajectory traj;
                std::string problem;
                try {
                    traj = trajectory_from_json(m.at("trajectory"));
                } catch (const std::exception& e) {
                    problem = std::string("bad trajectory: ") + e.what();
                }
                if (problem.empty() && traj.points.empty()) problem = "empty trajectory";
                for (const auto& p : traj.points) {
                    if (problem.empty() && static_cast<std::size_t>(p.q.size()) != cfg_.dof)
                        problem = "trajectory dof does not match the robot";
                }
                if (!problem.empty()) {
                    if (!status(pid, "aborted", problem)) return true;
                    continue;
                }
                if (!status(pid, "running")) return true;
                Playback p;
                p.proposal_id = pid;
                p.execution = executions_;
                p.times = playback_times(cfg_, traj.points.back().t, executions_);
                p.traj = std::move(traj);
                p.start = Clock::now();
                play = std::move(p);
            } else if (type == "abort") {
                if (play) {
                    if (!status(play->proposal_id, "aborted", "abort requested by the twin")) return true;
                    play.reset();
                }
            } else if (type == "protocol_error") {
                std::cerr << "robot-sim: twin reported: " << m.value("message", "") << "\n";
            }
            continue;
        }

        if (frozen) continue;
        if (play && Clock::now() >= frame_due(*play)) {
            Playback& p = *play;
            const double t = p.times[p.next];
            q_ = sample_trajectory(p.traj, t);
            if (!send({{"type", "joint_state"}, {"t", t}, {"q", to_json(q_)}})) return true;
            const auto& inter = cfg_.script.interactions;
            for (; p.next_interaction < inter.size() && inter[p.next_interaction].at_t <= t; ++p.next_interaction) {
                const auto& i = inter[p.next_interaction];
                if (applies(i.execution, p.execution) && !send({{"type", "interaction"}, {"diff", to_json(i.diff)}}))
                    return true;
            }
            const auto& fails = cfg_.script.failures;
            for (; p.next_failure < fails.size() && fails[p.next_failure].at_t <= t; ++p.next_failure) {
                const auto& f = fails[p.next_failure];
                if (!applies(f.execution, p.execution)) continue;
                if (f.action == FailureAction::freeze) {
                    frozen = true;
                } else if (!status(p.proposal_id, "aborted", "scripted failure")) {
                    return true;
                }
                play.reset();
                break;
            }
            if (!play || frozen) continue;
            if (++p.next == p.times.size()) {
                if (!status(p.proposal_id, "done")) return true;
                play.reset();
                next_idle = Clock::now();
            }
            continue;
        }
        if (Clock::now() >= next_idle) {
            const double t = since_start();
            if (!send({{"type", "heartbeat"}, {"t", t}})) return true;
            if (!play && !send({{"type", "joint_state"}, {"t", t}, {"q", to_json(q_)}})) return true;
            next_idle = Clock::now() + period;
        }
    }
    return true;
}

}  // namespace dtwin
