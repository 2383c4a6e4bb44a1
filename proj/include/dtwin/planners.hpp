#pragma once

#include "dtwin/planning_scene.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dtwin {

enum class PlannerKind { rrt, rrt_star, prm };

const char* to_string(PlannerKind k);
std::optional<PlannerKind> planner_from_string(const std::string& s);

struct JointGoal {
    JointConfig q;
};

struct PoseGoal {
    Pose target;
    bool position_only = false;
};

using Goal = std::variant<JointGoal, PoseGoal>;

struct PlanParams {
    double step_size = 0.2;
    double goal_bias = 0.05;
    double motion_step = 0.05;
    int prm_samples = 500;
    int prm_k = 10;
    double rewire_radius = 0.6;
    /// Outcome-deciding iteration caps. The time budget only guards against
    /// runaway calls, so results do not depend on machine speed.
    int max_iterations = 20000;
    int rrt_star_iterations = 1500;
};

struct PlanRequest {
    std::uint64_t scene_revision = 0;
    JointConfig start;
    Goal goal;
    PlannerKind planner = PlannerKind::rrt;
    std::uint64_t seed = 0;
    double time_budget = 2.0;
    PlanParams params;
};

struct Path {
    std::vector<JointConfig> waypoints;
};

enum class PlanErrorCode { invalid_start, invalid_goal, no_path_found, stale_revision, invalid_request };

const char* to_string(PlanErrorCode c);

class PlanError : public std::runtime_error {
public:
    PlanError(PlanErrorCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
    PlanErrorCode code;
};

/// Tree or roadmap left behind by a planner call.
struct PlanDebug {
    PlannerKind planner = PlannerKind::rrt;
    std::vector<JointConfig> nodes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    /// PRM only, parallel to edges: 1 valid, 0 invalid, -1 never checked.
    std::vector<int> edge_status;
    std::size_t iterations = 0;
    double first_cost = 0.0;  ///< cost at the first goal connection
    double final_cost = 0.0;
};

/// Joint-space Euclidean length.
double path_length(const Path& p);

/// Resolves a pose goal to a valid joint configuration: IK from `start`, then
/// up to nine more seeds drawn from the limit box.
JointConfig resolve_goal(const CollisionChecker& checker, const PlanRequest& req);

Path plan(const PlanningScene& scene, const PlanRequest& req, PlanDebug* debug = nullptr);
Path plan_rrt(const PlanningScene& scene, const PlanRequest& req, PlanDebug* debug = nullptr);
Path plan_rrt_star(const PlanningScene& scene, const PlanRequest& req, PlanDebug* debug = nullptr);
Path plan_prm(const PlanningScene& scene, const PlanRequest& req, PlanDebug* debug = nullptr);

}  // namespace dtwin
