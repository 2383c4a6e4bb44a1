#pragma once

// Canonical JSON forms shared by the HTTP API, the robot link and the event
// log. Keys are sorted, output is compact and doubles print in their shortest
// round-trip form, so equal values always serialize to equal bytes.

#include "dtwin/planning_scene.hpp"
#include "dtwin/planners.hpp"
#include "dtwin/sdl.hpp"
#include "dtwin/trajectory.hpp"

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace dtwin {

using Json = nlohmann::json;

class CodecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string canonical(const Json& j);
/// Throws CodecError on malformed text.
Json parse_json(const std::string& text);

Json to_json(const Eigen::VectorXd& v);
Json to_json(const Vec3& v);
Json to_json(const UnitQuat& q);  ///< [w, x, y, z]
Json to_json(const Pose& p);      ///< {"rotation": [w,x,y,z], "translation": [x,y,z]}
Json to_json(const Shape& s);
Json to_json(const CollisionObject& o);
Json to_json(const SceneOp& op);
Json to_json(const SceneDiff& d);
Json to_json(const Goal& g);
Json to_json(const PlanParams& p);
Json to_json(const PlanRequest& r);
Json to_json(const Path& p);
Json to_json(const Trajectory& t);
Json to_json(const PlanDebug& d);
Json to_json(const sdl::Diagnostic& d);

/// Scene snapshot: robot description, joint state, per-link poses for
/// client-side cross-checks, objects sorted by id, attachments and the ACM.
Json scene_to_json(const PlanningScene& s);

// Decoders throw CodecError naming the offending field.
Eigen::VectorXd config_from_json(const Json& j);
Vec3 vec3_from_json(const Json& j);
UnitQuat quat_from_json(const Json& j);
Pose pose_from_json(const Json& j);
Shape shape_from_json(const Json& j);
CollisionObject object_from_json(const Json& j);
SceneOp op_from_json(const Json& j);
SceneDiff diff_from_json(const Json& j);
Goal goal_from_json(const Json& j);
PlanParams params_from_json(const Json& j);  ///< missing fields keep their defaults
PlanRequest request_from_json(const Json& j);
Path path_from_json(const Json& j);
Trajectory trajectory_from_json(const Json& j);
PlanningScene scene_from_json(const Json& j);

}  // namespace dtwin
