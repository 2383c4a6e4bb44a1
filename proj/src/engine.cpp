#include "dtwin/engine.hpp"

#include "dtwin/rng.hpp"

#include <algorithm>

namespace dtwin {

const char* to_string(CycleKind k) {
    switch (k) {
        case CycleKind::initializing: return "initializing";
        case CycleKind::idle: return "idle";
        case CycleKind::planning: return "planning";
        case CycleKind::awaiting_approval: return "awaiting_approval";
        case CycleKind::dispatching: return "dispatching";
        case CycleKind::executing: return "executing";
        case CycleKind::faulted: return "faulted";
    }
    return "faulted";
}

namespace {

CycleKind cycle_kind_from_string(const std::string& s) {
    for (const CycleKind k : {CycleKind::initializing, CycleKind::idle, CycleKind::planning,
                              CycleKind::awaiting_approval, CycleKind::dispatching, CycleKind::executing,
                              CycleKind::faulted}) {
        if (s == to_string(k)) return k;
    }
    throw CodecError("unknown cycle state '" + s + "'");
}

ProposalStatus proposal_status_from_string(const std::string& s) {
    for (const ProposalStatus p : {ProposalStatus::pending, ProposalStatus::approved, ProposalStatus::rejected,
                                   ProposalStatus::superseded, ProposalStatus::executed, ProposalStatus::aborted}) {
        if (s == to_string(p)) return p;
    }
    throw CodecError("unknown proposal status '" + s + "'");
}

const char* goal_status_string(GoalStatus s) {
    switch (s) {
        case GoalStatus::active: return "active";
        case GoalStatus::succeeded: return "succeeded";
        case GoalStatus::failed: return "failed";
    }
    return "failed";
}

GoalStatus goal_status_from_string(const std::string& s) {
    if (s == "active") return GoalStatus::active;
    if (s == "succeeded") return GoalStatus::succeeded;
    if (s == "failed") return GoalStatus::failed;
    throw CodecError("unknown goal status '" + s + "'");
}

sdl::Diagnostic diagnostic_from_json(const Json& j) {
    sdl::Diagnostic d;
    d.severity = j.at("severity").get<std::string>() == "warning" ? sdl::Severity::warning : sdl::Severity::error;
    d.line = j.at("line").get<int>();
    d.column = j.at("column").get<int>();
    d.message = j.at("message").get<std::string>();
    return d;
}

Json diagnostics_json(const std::vector<sdl::Diagnostic>& ds) {
    Json a = Json::array();
    for (const auto& d : ds) a.push_back(to_json(d));
    return a;
}

bool active_kind(CycleKind k) {
    return k == CycleKind::planning || k == CycleKind::awaiting_approval || k == CycleKind::dispatching ||
           k == CycleKind::executing;
}

bool executing_kind(CycleKind k) { return k == CycleKind::dispatching || k == CycleKind::executing; }

Json cycle_json(const CycleState& s) {
    Json j{{"state", to_string(s.kind)}};
    if (!s.goal_id.empty()) j["goal_id"] = s.goal_id;
    if (!s.proposal_id.empty()) j["proposal_id"] = s.proposal_id;
    if (!s.reason.empty()) j["reason"] = s.reason;
    if (!s.diagnostics.empty()) j["diagnostics"] = diagnostics_json(s.diagnostics);
    return j;
}

CycleState cycle_from_json(const Json& j) {
    CycleState s;
    s.kind = cycle_kind_from_string(j.at("state").get<std::string>());
    s.goal_id = j.value("goal_id", "");
    s.proposal_id = j.value("proposal_id", "");
    s.reason = j.value("reason", "");
    if (j.contains("diagnostics")) {
        for (const auto& d : j["diagnostics"]) s.diagnostics.push_back(diagnostic_from_json(d));
    }
    return s;
}

constexpr std::uint64_t kSmoothingStream = 0x736d6f6f74680000ULL;

}  // namespace

const char* to_string(ProposalStatus s) {
    switch (s) {
        case ProposalStatus::pending: return "pending";
        case ProposalStatus::approved: return "approved";
        case ProposalStatus::rejected: return "rejected";
        case ProposalStatus::superseded: return "superseded";
        case ProposalStatus::executed: return "executed";
        case ProposalStatus::aborted: return "aborted";
    }
    return "pending";
}

bool proposal_transition_allowed(ProposalStatus from, ProposalStatus to) {
    if (from == ProposalStatus::pending)
        return to == ProposalStatus::approved || to == ProposalStatus::rejected || to == ProposalStatus::superseded;
    if (from == ProposalStatus::approved) return to == ProposalStatus::executed || to == ProposalStatus::aborted;
    return false;
}

const char* to_string(EngineErrorCode c) {
    switch (c) {
        case EngineErrorCode::engine_busy: return "engine_busy";
        case EngineErrorCode::unknown_proposal: return "unknown_proposal";
        case EngineErrorCode::stale_proposal: return "stale_proposal";
        case EngineErrorCode::invalid_diff: return "invalid_diff";
        case EngineErrorCode::invalid_request: return "invalid_request";
        case EngineErrorCode::not_initialized: return "not_initialized";
        case EngineErrorCode::not_executing: return "not_executing";
    }
    return "invalid_request";
}

const char* to_string(ExecState s) {
    switch (s) {
        case ExecState::running: return "running";
        case ExecState::done: return "done";
        case ExecState::aborted: return "aborted";
    }
    return "aborted";
}

std::optional<ExecState> exec_state_from_string(const std::string& s) {
    if (s == "running") return ExecState::running;
    if (s == "done") return ExecState::done;
    if (s == "aborted") return ExecState::aborted;
    return std::nullopt;
}

Json to_json(const Event& e) { return {{"seq", e.seq}, {"kind", e.kind}, {"payload", e.payload}}; }

Event event_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("seq") || !j.contains("kind")) throw CodecError("malformed event");
    return {j["seq"].get<std::uint64_t>(), j["kind"].get<std::string>(), j.value("payload", Json::object())};
}

Json to_json(const PlannerPrefs& p) {
    return {{"planner", to_string(p.planner)},
            {"time_budget", p.time_budget},
            {"params", to_json(p.params)},
            {"smoothing_iterations", p.smoothing_iterations},
            {"interpolation_step", p.interpolation_step}};
}

PlannerPrefs prefs_from_json(const Json& j) {
    PlannerPrefs p;
    if (j.is_null()) return p;
    if (!j.is_object()) throw CodecError("planner preferences must be an object");
    if (j.contains("planner")) {
        if (!j["planner"].is_string()) throw CodecError("'planner' must be a string");
        const auto k = planner_from_string(j["planner"].get<std::string>());
        if (!k) throw CodecError("unknown planner '" + j["planner"].get<std::string>() + "'");
        p.planner = *k;
    }
    if (j.contains("time_budget")) {
        if (!j["time_budget"].is_number() || !(j["time_budget"].get<double>() > 0))
            throw CodecError("'time_budget' must be a positive number");
        p.time_budget = j["time_budget"].get<double>();
    }
    if (j.contains("params")) p.params = params_from_json(j["params"]);
    if (j.contains("smoothing_iterations")) {
        if (!j["smoothing_iterations"].is_number_integer()) throw CodecError("'smoothing_iterations' must be an integer");
        p.smoothing_iterations = j["smoothing_iterations"].get<int>();
    }
    if (j.contains("interpolation_step")) {
        if (!j["interpolation_step"].is_number() || !(j["interpolation_step"].get<double>() > 0))
            throw CodecError("'interpolation_step' must be a positive number");
        p.interpolation_step = j["interpolation_step"].get<double>();
    }
    return p;
}

Json to_json(const Proposal& p) {
    return {{"id", p.id},
            {"goal_id", p.goal_id},
            {"request", to_json(p.request)},
            {"path", to_json(p.path)},
            {"trajectory", to_json(p.trajectory)},
            {"attempt", p.attempt},
            {"scene_revision", p.scene_revision},
            {"status", to_string(p.status)}};
}

Proposal proposal_from_json(const Json& j) {
    Proposal p;
    p.id = j.at("id").get<std::string>();
    p.goal_id = j.at("goal_id").get<std::string>();
    p.request = request_from_json(j.at("request"));
    p.path = path_from_json(j.at("path"));
    p.trajectory = trajectory_from_json(j.at("trajectory"));
    p.attempt = j.at("attempt").get<int>();
    p.scene_revision = j.at("scene_revision").get<std::uint64_t>();
    p.status = proposal_status_from_string(j.at("status").get<std::string>());
    return p;
}

PlanOutcome run_plan_job(const PlanJob& job) {
    PlanOutcome out;
    out.job = job.job;
    try {
        const Path raw = plan(*job.scene, job.request);
        const Path smooth = shortcut_smooth(raw, *job.scene, splitmix64(job.request.seed ^ kSmoothingStream),
                                            job.prefs.smoothing_iterations, job.request.params.motion_step);
        const Path fine = interpolate(smooth, job.prefs.interpolation_step);
        out.trajectory = time_parameterize(fine, *job.scene->robot);
        out.path = fine;
    } catch (const PlanError& e) {
        out.error = e.code;
        out.message = e.what();
    } catch (const std::exception& e) {
        out.error = PlanErrorCode::invalid_request;
        out.message = e.what();
    }
    return out;
}

Engine::Engine(EngineConfig cfg) : cfg_(cfg) {}

void Engine::emit(const std::string& kind, Json payload) {
    Event e{seq_ + 1, kind, std::move(payload)};
    apply(e);
    if (sink_) sink_(e);
}

void Engine::emit_state(CycleKind k, const std::string& goal_id, const std::string& proposal_id,
                        const std::string& reason, const std::vector<sdl::Diagnostic>& diags) {
    CycleState s{k, goal_id, proposal_id, reason, diags};
    emit("state", cycle_json(s));
}

Effects Engine::take_effects() {
    Effects e = std::move(effects_);
    effects_ = {};
    return e;
}

const Proposal* Engine::proposal(const std::string& id) const {
    const auto it = proposals_.find(id);
    return it == proposals_.end() ? nullptr : &it->second;
}

const GoalRecord* Engine::goal(const std::string& id) const {
    const auto it = goals_.find(id);
    return it == goals_.end() ? nullptr : &it->second;
}

void Engine::apply(const Event& e) {
    seq_ = e.seq;
    const Json& p = e.payload;
    const std::string& k = e.kind;
    if (k == "state") {
        state_ = cycle_from_json(p);
        if (!executing_kind(state_.kind)) attention_.clear();
        if (state_.kind != CycleKind::planning) active_request_.reset();
    } else if (k == "init_complete") {
        const auto parsed = sdl::parse(p.at("sdl").get<std::string>());
        if (!parsed.ok()) throw std::logic_error("logged scene description no longer parses");
        scene_ = std::make_shared<const PlanningScene>(
            from_scene_model(sdl::to_scene_model(*parsed.document), p.at("revision").get<std::uint64_t>()));
    } else if (k == "goal_submitted") {
        GoalRecord g;
        g.id = p.at("goal_id").get<std::string>();
        g.goal = goal_from_json(p.at("goal"));
        g.prefs = prefs_from_json(p.at("prefs"));
        goals_[g.id] = std::move(g);
        ++goal_counter_;
    } else if (k == "plan_started") {
        goals_.at(p.at("goal_id").get<std::string>()).attempt = p.at("attempt").get<int>();
        job_ = p.at("job").get<std::uint64_t>();
        active_request_ = request_from_json(p.at("request"));
    } else if (k == "proposal_created") {
        Proposal prop = proposal_from_json(p.at("proposal"));
        proposals_[prop.id] = std::move(prop);
        ++proposal_counter_;
    } else if (k == "proposal_status") {
        Proposal& prop = proposals_.at(p.at("proposal_id").get<std::string>());
        const ProposalStatus next = proposal_status_from_string(p.at("status").get<std::string>());
        if (!proposal_transition_allowed(prop.status, next)) throw std::logic_error("illegal proposal transition");
        prop.status = next;
    } else if (k == "goal_failed") {
        goals_.at(p.at("goal_id").get<std::string>()).status = GoalStatus::failed;
    } else if (k == "goal_completed") {
        goals_.at(p.at("goal_id").get<std::string>()).status = GoalStatus::succeeded;
    } else if (k == "scene_diff") {
        const SceneDiff d = diff_from_json(p.at("diff"));
        auto next = std::make_shared<const PlanningScene>(apply_diff(*scene_, d));
        if (next->revision != p.at("revision").get<std::uint64_t>()) throw std::logic_error("scene revision mismatch");
        scene_ = std::move(next);
    } else if (k == "robot_link") {
        robot_connected_ = p.at("connected").get<bool>();
    } else if (k == "attention") {
        attention_.push_back(p.at("message").get<std::string>());
    }
    // decision, dispatched, exec_status, plan_failed, telemetry and abort
    // events are audit records with no state of their own.
}

void Engine::init_from_dsl(const std::string& source) {
    if (active_kind(state_.kind)) throw EngineError(EngineErrorCode::engine_busy, "engine is busy");
    const sdl::ParseResult parsed = sdl::parse(source);
    if (!parsed.ok()) {
        emit("init_failed", {{"diagnostics", diagnostics_json(parsed.diagnostics)}});
        emit_state(CycleKind::faulted, {}, {}, "scene description has errors", parsed.diagnostics);
        return;
    }
    try {
        (void)sdl::to_scene_model(*parsed.document);
    } catch (const std::exception& e) {
        const std::vector<sdl::Diagnostic> diags{{sdl::Severity::error, 1, 1, e.what()}};
        emit("init_failed", {{"diagnostics", diagnostics_json(diags)}});
        emit_state(CycleKind::faulted, {}, {}, "scene description has errors", diags);
        return;
    }
    const std::uint64_t revision = scene_ ? scene_->revision + 1 : 1;
    emit("init_complete", {{"sdl", source}, {"revision", revision}, {"warnings", diagnostics_json(parsed.diagnostics)}});
    emit_state(CycleKind::idle);
}

void Engine::fail_init(const std::string& message) {
    if (active_kind(state_.kind)) throw EngineError(EngineErrorCode::engine_busy, "engine is busy");
    const std::vector<sdl::Diagnostic> diags{{sdl::Severity::error, 1, 1, message}};
    emit("init_failed", {{"diagnostics", diagnostics_json(diags)}});
    emit_state(CycleKind::faulted, {}, {}, "scene description has errors", diags);
}

std::string Engine::submit_goal(const Goal& goal, const PlannerPrefs& prefs) {
    if (state_.kind != CycleKind::idle) {
        if (state_.kind == CycleKind::faulted || state_.kind == CycleKind::initializing)
            throw EngineError(EngineErrorCode::not_initialized, "no valid scene is loaded");
        throw EngineError(EngineErrorCode::engine_busy, "engine is busy");
    }
    const auto dof = static_cast<Eigen::Index>(scene_->robot->dof());
    if (const auto* jg = std::get_if<JointGoal>(&goal); jg && jg->q.size() != dof)
        throw EngineError(EngineErrorCode::invalid_request, "joint goal has the wrong dimension");
    if (!(prefs.time_budget > 0) || !(prefs.interpolation_step > 0) || prefs.smoothing_iterations < 0)
        throw EngineError(EngineErrorCode::invalid_request, "invalid planner preferences");
    const std::string id = "g" + std::to_string(goal_counter_ + 1);
    emit("goal_submitted", {{"goal_id", id}, {"goal", to_json(goal)}, {"prefs", to_json(prefs)}});
    start_attempt(id, 1);
    return id;
}

void Engine::start_attempt(const std::string& goal_id, int attempt) {
    const GoalRecord& g = goals_.at(goal_id);
    PlanRequest req;
    req.scene_revision = scene_->revision;
    req.start = scene_->current_q;
    req.goal = g.goal;
    req.planner = g.prefs.planner;
    req.seed = hash_seed(goal_id, static_cast<std::uint64_t>(attempt));
    req.time_budget = g.prefs.time_budget;
    req.params = g.prefs.params;
    const std::uint64_t job = job_ + 1;
    emit("plan_started",
         {{"goal_id", goal_id}, {"attempt", attempt}, {"seed", req.seed}, {"job", job}, {"request", to_json(req)}});
    emit_state(CycleKind::planning, goal_id);
    effects_.plans.push_back({job, goal_id, attempt, req, scene_, g.prefs});
}

void Engine::fail_goal(const std::string& goal_id, const std::string& reason) {
    emit("goal_failed", {{"goal_id", goal_id}, {"reason", reason}});
    emit_state(CycleKind::idle, {}, {}, reason);
}

void Engine::set_proposal_status(const std::string& id, ProposalStatus s, const std::string& reason) {
    Json p{{"proposal_id", id}, {"status", to_string(s)}};
    if (!reason.empty()) p["reason"] = reason;
    emit("proposal_status", std::move(p));
}

void Engine::on_plan_result(const PlanOutcome& outcome) {
    if (state_.kind != CycleKind::planning || outcome.job != job_ || !active_request_) return;
    const std::string goal_id = state_.goal_id;
    const int attempt = goals_.at(goal_id).attempt;
    if (!outcome.path || !outcome.trajectory) {
        emit("plan_failed", {{"goal_id", goal_id},
                             {"attempt", attempt},
                             {"error", to_string(outcome.error)},
                             {"message", outcome.message}});
        if (attempt < cfg_.max_attempts) {
            start_attempt(goal_id, attempt + 1);
        } else {
            fail_goal(goal_id, std::string("planning failed after ") + std::to_string(attempt) + " attempts: " +
                                   to_string(outcome.error));
        }
        return;
    }
    Proposal prop;
    prop.id = "p" + std::to_string(proposal_counter_ + 1);
    prop.goal_id = goal_id;
    prop.request = *active_request_;
    prop.path = *outcome.path;
    prop.trajectory = *outcome.trajectory;
    prop.attempt = attempt;
    prop.scene_revision = prop.request.scene_revision;
    const bool stale = scene_->revision != prop.scene_revision;
    prop.status = stale ? ProposalStatus::superseded : ProposalStatus::pending;
    const std::string pid = prop.id;
    emit("proposal_created", {{"proposal", to_json(prop)}});
    if (stale) {
        start_attempt(goal_id, attempt);
        return;
    }
    planned_scene_ = scene_;
    emit_state(CycleKind::awaiting_approval, goal_id, pid);
}

void Engine::decide(const std::string& proposal_id, bool approve) {
    const Proposal* prop = proposal(proposal_id);
    if (!prop) throw EngineError(EngineErrorCode::unknown_proposal, "unknown proposal '" + proposal_id + "'");
    if (prop->status != ProposalStatus::pending || state_.kind != CycleKind::awaiting_approval ||
        state_.proposal_id != proposal_id)
        throw EngineError(EngineErrorCode::stale_proposal,
                          "proposal '" + proposal_id + "' is " + to_string(prop->status));
    const std::string goal_id = prop->goal_id;
    const int attempt = prop->attempt;
    emit("decision", {{"proposal_id", proposal_id}, {"approve", approve}});
    if (!approve) {
        set_proposal_status(proposal_id, ProposalStatus::rejected);
        if (attempt < cfg_.max_attempts) {
            start_attempt(goal_id, attempt + 1);
        } else {
            fail_goal(goal_id, "rejected " + std::to_string(attempt) + " times");
        }
        return;
    }
    const PlanningScenePtr planned = planned_scene_ ? planned_scene_ : scene_;
    if (!collision_equivalent(*scene_, *planned) || scene_->current_q != prop->path.waypoints.front()) {
        set_proposal_status(proposal_id, ProposalStatus::superseded, "scene changed since planning");
        start_attempt(goal_id, attempt);
        return;
    }
    set_proposal_status(proposal_id, ProposalStatus::approved);
    emit_state(CycleKind::dispatching, goal_id, proposal_id);
    if (!robot_connected_) {
        set_proposal_status(proposal_id, ProposalStatus::aborted, "robot not connected");
        emit("goal_failed", {{"goal_id", goal_id}, {"reason", "robot not connected"}});
        emit_state(CycleKind::idle, {}, {}, "dispatch failed: robot not connected");
        return;
    }
    emit("dispatched", {{"proposal_id", proposal_id}});
    effects_.dispatches.push_back({proposal_id, prop->trajectory});
}

void Engine::on_exec_status(const std::string& proposal_id, ExecState status, const std::string& reason) {
    if (!executing_kind(state_.kind) || state_.proposal_id != proposal_id) return;
    const std::string goal_id = state_.goal_id;
    Json p{{"proposal_id", proposal_id}, {"status", to_string(status)}};
    if (!reason.empty()) p["reason"] = reason;
    emit("exec_status", std::move(p));
    switch (status) {
        case ExecState::running:
            if (state_.kind == CycleKind::dispatching) emit_state(CycleKind::executing, goal_id, proposal_id);
            return;
        case ExecState::done:
            flush_telemetry(0.0, true);
            set_proposal_status(proposal_id, ProposalStatus::executed);
            emit("goal_completed", {{"goal_id", goal_id}});
            emit_state(CycleKind::idle);
            return;
        case ExecState::aborted:
            flush_telemetry(0.0, true);
            set_proposal_status(proposal_id, ProposalStatus::aborted, reason);
            emit("goal_failed", {{"goal_id", goal_id}, {"reason", "execution aborted"}});
            emit_state(CycleKind::idle, {}, {}, reason.empty() ? "execution aborted" : "execution aborted: " + reason);
            return;
    }
}

bool Engine::on_joint_state(double t, const JointConfig& q, double now) {
    if (!executing_kind(state_.kind) || !scene_) return false;
    if (static_cast<std::size_t>(q.size()) != scene_->robot->dof() || !q.allFinite()) return false;
    emit("telemetry", {{"t", t}, {"q", to_json(q)}});
    pending_q_ = q;
    flush_telemetry(now);
    return true;
}

void Engine::flush_telemetry(double now, bool force) {
    if (!pending_q_) return;
    if (!force && last_q_apply_ && now - *last_q_apply_ < 1.0 / cfg_.telemetry_rate_hz) return;
    const JointConfig q = *pending_q_;
    pending_q_.reset();
    if (!force || !last_q_apply_) last_q_apply_ = now;
    if (q == scene_->current_q) return;
    const SceneDiff d{{diff::SetJointState{q}}};
    emit("scene_diff", {{"diff", to_json(d)}, {"revision", scene_->revision + 1}, {"source", "telemetry"}});
}

std::uint64_t Engine::edit_scene(const SceneDiff& d, const std::string& source) {
    if (!scene_) throw EngineError(EngineErrorCode::not_initialized, "no scene is loaded");
    PlanningScene next;
    try {
        next = apply_diff(*scene_, d);
    } catch (const DiffError& e) {
        throw EngineError(EngineErrorCode::invalid_diff, e.what(), e.code);
    }
    const PlanningScenePtr prev = scene_;
    emit("scene_diff", {{"diff", to_json(d)}, {"revision", next.revision}, {"source", source}});
    if (state_.kind == CycleKind::awaiting_approval) {
        const PlanningScene& planned = planned_scene_ ? *planned_scene_ : *prev;
        if (!collision_equivalent(*scene_, planned) || scene_->current_q != planned.current_q) {
            const Proposal& prop = proposals_.at(state_.proposal_id);
            const std::string goal_id = prop.goal_id;
            const int attempt = prop.attempt;
            set_proposal_status(prop.id, ProposalStatus::superseded, "scene edited");
            start_attempt(goal_id, attempt);
        }
    } else if (executing_kind(state_.kind) && source == "operator") {
        emit("attention", {{"message", "scene edited during execution"}, {"revision", scene_->revision}});
    }
    return scene_->revision;
}

void Engine::abort_execution(const std::string& reason) {
    if (!executing_kind(state_.kind)) throw EngineError(EngineErrorCode::not_executing, "nothing is executing");
    emit("abort_requested", {{"proposal_id", state_.proposal_id}, {"reason", reason}});
    if (robot_connected_) {
        effects_.abort_robot = true;
    } else {
        on_exec_status(state_.proposal_id, ExecState::aborted, reason);
    }
}

void Engine::on_robot_link(bool connected, const std::string& robot_id) {
    emit("robot_link", {{"connected", connected}, {"robot_id", robot_id}});
    if (!connected && executing_kind(state_.kind)) on_exec_status(state_.proposal_id, ExecState::aborted, "robot link lost");
}

void Engine::resume() {
    if (robot_connected_) emit("robot_link", {{"connected", false}, {"robot_id", ""}});
    switch (state_.kind) {
        case CycleKind::planning: {
            const std::string goal_id = state_.goal_id;
            start_attempt(goal_id, goals_.at(goal_id).attempt);
            break;
        }
        case CycleKind::awaiting_approval: planned_scene_ = scene_; break;
        case CycleKind::dispatching:
        case CycleKind::executing: on_exec_status(state_.proposal_id, ExecState::aborted, "twin restarted"); break;
        default: break;
    }
}

Json Engine::state_json() const {
    Json j{{"state", to_string(state_.kind)}, {"scene_revision", scene_ ? scene_->revision : 0}};
    if (active_kind(state_.kind)) j["active_goal_id"] = state_.goal_id;
    if (!state_.proposal_id.empty()) j["proposal_id"] = state_.proposal_id;
    if (state_.kind == CycleKind::planning || state_.kind == CycleKind::awaiting_approval) {
        if (const auto* g = goal(state_.goal_id)) j["attempt"] = g->attempt;
    }
    if (!state_.reason.empty() && state_.kind == CycleKind::faulted) j["reason"] = state_.reason;
    if (!state_.diagnostics.empty()) j["diagnostics"] = diagnostics_json(state_.diagnostics);
    if (!attention_.empty()) j["attention"] = attention_;
    return j;
}

Json Engine::snapshot() const {
    Json goals = Json::array();
    for (const auto& [id, g] : goals_) {
        goals.push_back({{"id", id},
                         {"goal", to_json(g.goal)},
                         {"prefs", to_json(g.prefs)},
                         {"attempt", g.attempt},
                         {"status", goal_status_string(g.status)}});
    }
    Json props = Json::array();
    for (const auto& [id, p] : proposals_) props.push_back(to_json(p));
    return {{"seq", seq_},
            {"state", cycle_json(state_)},
            {"scene", scene_ ? scene_to_json(*scene_) : Json()},
            {"goals", goals},
            {"proposals", props},
            {"goal_counter", goal_counter_},
            {"proposal_counter", proposal_counter_},
            {"job", job_},
            {"active_request", active_request_ ? to_json(*active_request_) : Json()},
            {"robot_connected", robot_connected_},
            {"attention", attention_}};
}

Engine Engine::from_snapshot(const Json& j, EngineConfig cfg) {
    Engine e(cfg);
    e.seq_ = j.at("seq").get<std::uint64_t>();
    e.state_ = cycle_from_json(j.at("state"));
    if (!j.at("scene").is_null()) e.scene_ = std::make_shared<const PlanningScene>(scene_from_json(j["scene"]));
    for (const auto& g : j.at("goals")) {
        GoalRecord r;
        r.id = g.at("id").get<std::string>();
        r.goal = goal_from_json(g.at("goal"));
        r.prefs = prefs_from_json(g.at("prefs"));
        r.attempt = g.at("attempt").get<int>();
        r.status = goal_status_from_string(g.at("status").get<std::string>());
        e.goals_[r.id] = std::move(r);
    }
    for (const auto& p : j.at("proposals")) {
        Proposal prop = proposal_from_json(p);
        e.proposals_[prop.id] = std::move(prop);
    }
    e.goal_counter_ = j.at("goal_counter").get<std::uint64_t>();
    e.proposal_counter_ = j.at("proposal_counter").get<std::uint64_t>();
    e.job_ = j.at("job").get<std::uint64_t>();
    if (!j.at("active_request").is_null()) e.active_request_ = request_from_json(j["active_request"]);
    e.robot_connected_ = j.at("robot_connected").get<bool>();
    e.attention_ = j.at("attention").get<std::vector<std::string>>();
    return e;
}

}  // namespace dtwin
