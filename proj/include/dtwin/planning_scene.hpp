#pragma once

#include "dtwin/scene_model.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace dtwin {

/// Unordered id pairs whose contact is ignored, plus ids that are ignored
/// against everything (zones).
class AllowedCollisionMatrix {
public:
    void allow(const std::string& a, const std::string& b);
    void allow_everything(const std::string& id);
    void forget(const std::string& id);
    bool allowed(const std::string& a, const std::string& b) const;

    const std::set<std::pair<std::string, std::string>>& pairs() const { return pairs_; }
    const std::set<std::string>& global() const { return global_; }

    friend bool operator==(const AllowedCollisionMatrix&, const AllowedCollisionMatrix&) = default;

private:
    std::set<std::pair<std::string, std::string>> pairs_;
    std::set<std::string> global_;
};

struct AttachedObject {
    CollisionObject object;  ///< `object.pose` is unused while attached
    std::size_t link_index = 0;
    Pose grasp_pose;         ///< object pose in the carrying link's frame

    friend bool operator==(const AttachedObject&, const AttachedObject&) = default;
};

/// Immutable-by-convention snapshot; mutations go through apply_diff().
struct PlanningScene {
    std::string robot_id;
    std::shared_ptr<const RobotModel> robot;
    std::vector<std::string> link_ids;
    JointConfig current_q;
    std::map<std::string, CollisionObject> obstacles;  ///< world objects, zones included
    AllowedCollisionMatrix acm;
    std::vector<AttachedObject> attached;
    std::uint64_t revision = 0;
    double margin = kDefaultCollisionMargin;

    bool is_zone(const std::string& id) const;
    const AttachedObject* find_attached(const std::string& id) const;
};

using PlanningScenePtr = std::shared_ptr<const PlanningScene>;

/// Adjacent link pairs are pre-allowed; current_q is the zero configuration
/// clamped into the limits.
PlanningScene from_scene_model(const SceneModel& m, std::uint64_t revision = 1);

namespace diff {
struct AddObject {
    CollisionObject object;
};
struct RemoveObject {
    std::string id;
};
struct MoveObject {
    std::string id;
    Pose pose;
};
struct SetJointState {
    JointConfig q;
};
struct Attach {
    std::string object_id;
    std::size_t link_index = 0;  ///< zero-based
};
struct Detach {
    std::string object_id;
    std::optional<Pose> drop_pose;  ///< defaults to where the link carries it
};
}  // namespace diff

using SceneOp = std::variant<diff::AddObject, diff::RemoveObject, diff::MoveObject, diff::SetJointState, diff::Attach,
                             diff::Detach>;

struct SceneDiff {
    std::vector<SceneOp> ops;
};

enum class DiffErrorCode { unknown_id, duplicate_id, attach_while_attached, detach_while_detached, invalid_link,
                           dimension_mismatch, invalid_shape };

const char* to_string(DiffErrorCode c);

class DiffError : public std::runtime_error {
public:
    DiffError(DiffErrorCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
    DiffErrorCode code;
};

/// Applies every op in order and bumps the revision once. Atomic: on error
/// the input is untouched and DiffError is thrown.
PlanningScene apply_diff(const PlanningScene& scene, const SceneDiff& d);

/// World pose of an attached object at joint config q.
Pose attached_world_pose(const PlanningScene& scene, const AttachedObject& a, const JointConfig& q);

/// Object set, shapes and poses, excluding zones and metadata.
bool collision_equivalent(const PlanningScene& a, const PlanningScene& b);

/// Precomputed pair lists over one scene snapshot. Holds a reference; the
/// scene must outlive the checker.
class CollisionChecker {
public:
    explicit CollisionChecker(const PlanningScene& scene);

    const PlanningScene& scene() const { return scene_; }

    bool state_valid(const JointConfig& q) const;

    /// Discrete check at every sample of the straight joint-space segment,
    /// consecutive samples at most `step` apart in max-norm.
    bool motion_valid(const JointConfig& a, const JointConfig& b, double step) const;

    /// Continuous check by conservative advancement: every configuration on
    /// the segment keeps at least `clearance_floor` beyond the margin. Samples
    /// are never further than `max_stride` apart, so success implies
    /// motion_valid at that step.
    bool segment_clear(const JointConfig& a, const JointConfig& b, double max_stride) const;

    static constexpr double clearance_floor = 2e-4;

private:
    struct Mover {
        std::string id;
        const Shape* shape;
        std::size_t link;
        std::optional<Pose> grasp;  ///< set for attached objects
        double radius;
        std::vector<double> reach;  ///< per joint, bound on the lever arm to any point of the body
    };
    struct Fixed {
        const CollisionObject* object;
        double radius;
    };

    void mover_poses(const JointConfig& q, std::vector<Pose>& out) const;
    void check_dims(const JointConfig& q) const;

    const PlanningScene& scene_;
    std::vector<Mover> movers_;
    std::vector<Fixed> fixed_;
    std::vector<std::pair<std::size_t, std::size_t>> mover_fixed_;
    std::vector<std::pair<std::size_t, std::size_t>> mover_mover_;
};

bool state_valid(const PlanningScene& scene, const JointConfig& q);
bool motion_valid(const PlanningScene& scene, const JointConfig& a, const JointConfig& b, double step);

}  // namespace dtwin
