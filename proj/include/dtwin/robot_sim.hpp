#pragma once

// Kinematic stand-in for the physical arm. Plays received trajectories back
// in scaled real time over the robot wire protocol.

#include "dtwin/json_codec.hpp"
#include "dtwin/line_socket.hpp"
#include "dtwin/planning_scene.hpp"
#include "dtwin/trajectory.hpp"

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dtwin {

enum class FailureAction { abort, freeze };

/// `execution` is the 1-based execute count it applies to; unset means every one.
struct ScriptedFailure {
    double at_t = 0.0;
    FailureAction action = FailureAction::abort;
    std::optional<int> execution;
};

struct ScriptedInteraction {
    double at_t = 0.0;
    SceneDiff diff;
    std::optional<int> execution;
};

struct SimScript {
    std::vector<ScriptedFailure> failures;
    std::vector<ScriptedInteraction> interactions;
};

SimScript script_from_json(const Json& j);

struct SimConfig {
    std::size_t dof = 0;
    double tick_rate = 100.0;   ///< samples per second of trajectory time
    double time_scale = 1.0;    ///< 10 plays a 1 s trajectory in 0.1 s
    JointConfig initial_q;      ///< zeros when empty
    SimScript script;
    std::string robot_id = "robot_sim";
    double idle_period = 0.5;   ///< wall seconds between idle heartbeats
};

/// Throws std::invalid_argument unless dof, tick_rate and time_scale are positive.
void validate(const SimConfig& cfg);

/// Sample times of one playback: the tick grid, the scripted times and T.
std::vector<double> playback_times(const SimConfig& cfg, double duration, int execution);

class RobotSim {
public:
    RobotSim(SimConfig cfg, std::string host, std::uint16_t port);

    /// Connects, handshakes and serves until stop(). Reconnects with backoff.
    void run();
    /// Safe from any thread.
    void stop() { stop_ = true; }

    const JointConfig& q() const { return q_; }
    int executions() const { return executions_; }

private:
    /// One connection; true if the handshake completed.
    bool serve(LineConnection& c);

    SimConfig cfg_;
    std::string host_;
    std::uint16_t port_;
    std::atomic<bool> stop_{false};
    JointConfig q_;
    int executions_ = 0;
};

}  // namespace dtwin
