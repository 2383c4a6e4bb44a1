#pragma once

// Reconfiguration cycle. Commands validate against the current state and
// emit events; apply() folds an event into the state and is the only code
// that mutates it, so replaying the event log rebuilds the engine exactly.
// The engine is single-threaded: callers serialize all access.

#include "dtwin/json_codec.hpp"
#include "dtwin/planners.hpp"
#include "dtwin/trajectory.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtwin {

enum class CycleKind { initializing, idle, planning, awaiting_approval, dispatching, executing, faulted };

const char* to_string(CycleKind k);

struct CycleState {
    CycleKind kind = CycleKind::initializing;
    std::string goal_id;
    std::string proposal_id;
    std::string reason;
    std::vector<sdl::Diagnostic> diagnostics;
};

enum class ProposalStatus { pending, approved, rejected, superseded, executed, aborted };

const char* to_string(ProposalStatus s);

/// Allowed proposal status transitions.
bool proposal_transition_allowed(ProposalStatus from, ProposalStatus to);

struct PlannerPrefs {
    PlannerKind planner = PlannerKind::rrt_star;
    double time_budget = 2.0;
    PlanParams params;
    int smoothing_iterations = 100;
    double interpolation_step = 0.2;
};

struct Proposal {
    std::string id;
    std::string goal_id;
    PlanRequest request;
    Path path;
    Trajectory trajectory;
    int attempt = 1;
    std::uint64_t scene_revision = 0;
    ProposalStatus status = ProposalStatus::pending;
};

enum class GoalStatus { active, succeeded, failed };

struct GoalRecord {
    std::string id;
    Goal goal;
    PlannerPrefs prefs;
    int attempt = 0;
    GoalStatus status = GoalStatus::active;
};

struct Event {
    std::uint64_t seq = 0;
    std::string kind;
    Json payload;
};

Json to_json(const Event& e);
Event event_from_json(const Json& j);
Json to_json(const PlannerPrefs& p);
PlannerPrefs prefs_from_json(const Json& j);  ///< missing fields keep their defaults
Json to_json(const Proposal& p);
Proposal proposal_from_json(const Json& j);

struct PlanJob {
    std::uint64_t job = 0;
    std::string goal_id;
    int attempt = 1;
    PlanRequest request;
    PlanningScenePtr scene;
    PlannerPrefs prefs;
};

struct PlanOutcome {
    std::uint64_t job = 0;
    std::optional<Path> path;
    std::optional<Trajectory> trajectory;
    PlanErrorCode error = PlanErrorCode::no_path_found;
    std::string message;
};

/// plan, shortcut, interpolate, time-parameterize. Pure; any thread.
PlanOutcome run_plan_job(const PlanJob& job);

struct Dispatch {
    std::string proposal_id;
    Trajectory trajectory;
};

/// Side effects requested by commands, for the host to carry out.
struct Effects {
    std::vector<PlanJob> plans;
    std::vector<Dispatch> dispatches;
    bool abort_robot = false;
};

enum class EngineErrorCode { engine_busy, unknown_proposal, stale_proposal, invalid_diff, invalid_request,
                             not_initialized, not_executing };

const char* to_string(EngineErrorCode c);

class EngineError : public std::runtime_error {
public:
    EngineError(EngineErrorCode c, const std::string& msg, std::optional<DiffErrorCode> d = std::nullopt)
        : std::runtime_error(msg), code(c), diff_code(d) {}
    EngineErrorCode code;
    std::optional<DiffErrorCode> diff_code;
};

enum class ExecState { running, done, aborted };

const char* to_string(ExecState s);
std::optional<ExecState> exec_state_from_string(const std::string& s);

struct EngineConfig {
    int max_attempts = 3;
    double telemetry_rate_hz = 20.0;  ///< ceiling on joint-state scene revisions per second
};

class Engine {
public:
    using Sink = std::function<void(const Event&)>;

    explicit Engine(EngineConfig cfg = {});

    /// Receives every event after it has been applied.
    void set_sink(Sink sink) { sink_ = std::move(sink); }

    // Commands. Rejections throw EngineError and emit nothing.
    void init_from_dsl(const std::string& source);
    /// Enters Faulted with a single diagnostic, e.g. an unreadable file.
    void fail_init(const std::string& message);
    std::string submit_goal(const Goal& goal, const PlannerPrefs& prefs);
    void on_plan_result(const PlanOutcome& outcome);
    void decide(const std::string& proposal_id, bool approve);
    void on_exec_status(const std::string& proposal_id, ExecState status, const std::string& reason = {});
    /// Returns false when the frame is ignored (not executing, wrong size).
    bool on_joint_state(double t, const JointConfig& q, double now);
    /// Applies a coalesced joint state once the rate window allows it.
    void flush_telemetry(double now, bool force = false);
    std::uint64_t edit_scene(const SceneDiff& diff, const std::string& source = "operator");
    void abort_execution(const std::string& reason);
    void on_robot_link(bool connected, const std::string& robot_id);
    /// After a replay: drops the robot link, relaunches an interrupted plan
    /// and aborts an interrupted execution.
    void resume();

    /// The fold.
    void apply(const Event& e);

    Effects take_effects();

    const CycleState& state() const { return state_; }
    PlanningScenePtr scene() const { return scene_; }
    const Proposal* proposal(const std::string& id) const;
    const GoalRecord* goal(const std::string& id) const;
    const std::map<std::string, Proposal>& proposals() const { return proposals_; }
    std::uint64_t last_seq() const { return seq_; }
    bool robot_connected() const { return robot_connected_; }
    const EngineConfig& config() const { return cfg_; }

    /// {state, scene_revision, active_goal_id?, proposal_id?, ...}
    Json state_json() const;

    Json snapshot() const;
    static Engine from_snapshot(const Json& j, EngineConfig cfg = {});

private:
    void emit(const std::string& kind, Json payload);
    void emit_state(CycleKind k, const std::string& goal_id = {}, const std::string& proposal_id = {},
                    const std::string& reason = {}, const std::vector<sdl::Diagnostic>& diags = {});
    void start_attempt(const std::string& goal_id, int attempt);
    void fail_goal(const std::string& goal_id, const std::string& reason);
    void set_proposal_status(const std::string& id, ProposalStatus s, const std::string& reason = {});

    EngineConfig cfg_;
    Sink sink_;
    Effects effects_;

    // Folded state.
    std::uint64_t seq_ = 0;
    CycleState state_;
    PlanningScenePtr scene_;
    std::map<std::string, GoalRecord> goals_;
    std::map<std::string, Proposal> proposals_;
    std::uint64_t goal_counter_ = 0;
    std::uint64_t proposal_counter_ = 0;
    std::uint64_t job_ = 0;
    std::optional<PlanRequest> active_request_;
    bool robot_connected_ = false;
    std::vector<std::string> attention_;

    // Transient.
    PlanningScenePtr planned_scene_;
    std::optional<JointConfig> pending_q_;
    std::optional<double> last_q_apply_;
};

}  // namespace dtwin
