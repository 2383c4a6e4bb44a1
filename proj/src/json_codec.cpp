#include "dtwin/json_codec.hpp"

#include <cmath>

namespace dtwin {

std::string canonical(const Json& j) { return j.dump(); }

Json parse_json(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw CodecError(std::string("malformed JSON: ") + e.what());
    }
}

namespace {

const Json& field(const Json& j, const char* key) {
    if (!j.is_object()) throw CodecError(std::string("expected an object holding '") + key + "'");
    const auto it = j.find(key);
    if (it == j.end()) throw CodecError(std::string("missing field '") + key + "'");
    return *it;
}

double number(const Json& j, const char* what) {
    if (!j.is_number()) throw CodecError(std::string("'") + what + "' must be a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw CodecError(std::string("'") + what + "' must be finite");
    return v;
}

double number_field(const Json& j, const char* key) { return number(field(j, key), key); }

std::string string_field(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_string()) throw CodecError(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

std::size_t index_field(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw CodecError(std::string("'") + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

std::uint64_t u64_field(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw CodecError(std::string("'") + key + "' must be a non-negative integer");
    return v.get<std::uint64_t>();
}

bool bool_field(const Json& j, const char* key) {
    const Json& v = field(j, key);
    if (!v.is_boolean()) throw CodecError(std::string("'") + key + "' must be a boolean");
    return v.get<bool>();
}

}  // namespace

Json to_json(const Eigen::VectorXd& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

Json to_json(const UnitQuat& q) { return Json::array({q.w(), q.x(), q.y(), q.z()}); }

Json to_json(const Pose& p) { return {{"translation", to_json(p.translation)}, {"rotation", to_json(p.rotation)}}; }

Json to_json(const Shape& s) {
    if (const auto* b = std::get_if<Box>(&s)) return {{"type", "box"}, {"half_extents", to_json(b->half_extents)}};
    if (const auto* sp = std::get_if<Sphere>(&s)) return {{"type", "sphere"}, {"radius", sp->radius}};
    const auto& c = std::get<Cylinder>(s);
    return {{"type", "cylinder"}, {"radius", c.radius}, {"half_height", c.half_height}};
}

Json to_json(const CollisionObject& o) {
    return {{"id", o.id}, {"shape", to_json(o.shape)}, {"pose", to_json(o.pose)}, {"metadata", o.metadata}};
}

Json to_json(const SceneOp& op) {
    return std::visit(
        [](const auto& o) -> Json {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, diff::AddObject>) {
                return {{"op", "add_object"}, {"object", to_json(o.object)}};
            } else if constexpr (std::is_same_v<T, diff::RemoveObject>) {
                return {{"op", "remove_object"}, {"id", o.id}};
            } else if constexpr (std::is_same_v<T, diff::MoveObject>) {
                return {{"op", "move_object"}, {"id", o.id}, {"pose", to_json(o.pose)}};
            } else if constexpr (std::is_same_v<T, diff::SetJointState>) {
                return {{"op", "set_joint_state"}, {"q", to_json(o.q)}};
            } else if constexpr (std::is_same_v<T, diff::Attach>) {
                return {{"op", "attach"}, {"object_id", o.object_id}, {"link_index", o.link_index}};
            } else {
                Json j{{"op", "detach"}, {"object_id", o.object_id}};
                if (o.drop_pose) j["drop_pose"] = to_json(*o.drop_pose);
                return j;
            }
        },
        op);
}

Json to_json(const SceneDiff& d) {
    Json ops = Json::array();
    for (const auto& op : d.ops) ops.push_back(to_json(op));
    return {{"ops", ops}};
}

Json to_json(const Goal& g) {
    if (const auto* jg = std::get_if<JointGoal>(&g)) return {{"type", "joint"}, {"q", to_json(jg->q)}};
    const auto& pg = std::get<PoseGoal>(g);
    return {{"type", "pose"}, {"target", to_json(pg.target)}, {"position_only", pg.position_only}};
}

Json to_json(const PlanParams& p) {
    return {{"step_size", p.step_size},
            {"goal_bias", p.goal_bias},
            {"motion_step", p.motion_step},
            {"prm_samples", p.prm_samples},
            {"prm_k", p.prm_k},
            {"rewire_radius", p.rewire_radius},
            {"max_iterations", p.max_iterations},
            {"rrt_star_iterations", p.rrt_star_iterations}};
}

Json to_json(const PlanRequest& r) {
    return {{"scene_revision", r.scene_revision}, {"start", to_json(r.start)}, {"goal", to_json(r.goal)},
            {"planner", to_string(r.planner)},   {"seed", r.seed},              {"time_budget", r.time_budget},
            {"params", to_json(r.params)}};
}

Json to_json(const Path& p) {
    Json w = Json::array();
    for (const auto& q : p.waypoints) w.push_back(to_json(q));
    return {{"waypoints", w}};
}

Json to_json(const Trajectory& t) {
    Json pts = Json::array();
    for (const auto& p : t.points) pts.push_back({{"t", p.t}, {"q", to_json(p.q)}, {"qdot", to_json(p.qdot)}});
    return {{"points", pts}, {"total_duration", t.total_duration}};
}

Json to_json(const PlanDebug& d) {
    Json nodes = Json::array();
    for (const auto& q : d.nodes) nodes.push_back(to_json(q));
    Json edges = Json::array();
    for (std::size_t e = 0; e < d.edges.size(); ++e) {
        Json edge{{"from", d.edges[e].first}, {"to", d.edges[e].second}};
        if (e < d.edge_status.size())
            edge["status"] = d.edge_status[e] == 1 ? "valid" : d.edge_status[e] == 0 ? "invalid" : "unchecked";
        edges.push_back(std::move(edge));
    }
    return {{"planner", to_string(d.planner)}, {"nodes", nodes},          {"edges", edges},
            {"iterations", d.iterations},      {"first_cost", d.first_cost}, {"final_cost", d.final_cost}};
}

Json to_json(const sdl::Diagnostic& d) {
    return {{"severity", d.severity == sdl::Severity::error ? "error" : "warning"},
            {"line", d.line},
            {"column", d.column},
            {"message", d.message}};
}

Json scene_to_json(const PlanningScene& s) {
    const RobotModel& robot = *s.robot;
    Json joints = Json::array();
    for (std::size_t i = 0; i < robot.dof(); ++i) {
        const Joint& j = robot.joints()[i];
        joints.push_back({{"name", j.name},
                          {"link_id", s.link_ids.at(i)},
                          {"kind", to_string(j.kind)},
                          {"axis", to_json(j.axis)},
                          {"origin", to_json(j.origin)},
                          {"lower", j.lower},
                          {"upper", j.upper},
                          {"vel_limit", j.vel_limit},
                          {"acc_limit", j.acc_limit},
                          {"link_shape", to_json(robot.link_shapes()[i])}});
    }
    Json link_poses = Json::array();
    for (const auto& p : forward_kinematics(robot, s.current_q)) link_poses.push_back(to_json(p));
    Json objects = Json::array();
    for (const auto& [id, o] : s.obstacles) objects.push_back(to_json(o));  // std::map: sorted by id
    Json attached = Json::array();
    for (const auto& a : s.attached) {
        attached.push_back({{"object", to_json(a.object)},
                            {"link_index", a.link_index},
                            {"grasp_pose", to_json(a.grasp_pose)},
                            {"world_pose", to_json(attached_world_pose(s, a, s.current_q))}});
    }
    Json pairs = Json::array();
    for (const auto& [a, b] : s.acm.pairs()) pairs.push_back(Json::array({a, b}));
    return {{"revision", s.revision},
            {"robot", {{"id", s.robot_id}, {"base_pose", to_json(robot.base_pose())}, {"joints", joints}}},
            {"current_q", to_json(s.current_q)},
            {"link_poses", link_poses},
            {"objects", objects},
            {"attached", attached},
            {"acm", {{"pairs", pairs}, {"global", s.acm.global()}}},
            {"margin", s.margin}};
}

Eigen::VectorXd config_from_json(const Json& j) {
    if (!j.is_array()) throw CodecError("joint configuration must be an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], "joint value");
    return v;
}

Vec3 vec3_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw CodecError("vector must be an array of 3 numbers");
    return {number(j[0], "x"), number(j[1], "y"), number(j[2], "z")};
}

UnitQuat quat_from_json(const Json& j) {
    if (!j.is_array() || j.size() != 4) throw CodecError("rotation must be an array [w, x, y, z]");
    const double w = number(j[0], "w"), x = number(j[1], "x"), y = number(j[2], "y"), z = number(j[3], "z");
    if (!(w * w + x * x + y * y + z * z > 1e-12)) throw CodecError("rotation quaternion must be nonzero");
    return UnitQuat::from_coeffs(w, x, y, z);
}

Pose pose_from_json(const Json& j) {
    Pose p;
    p.translation = vec3_from_json(field(j, "translation"));
    if (j.contains("rotation")) p.rotation = quat_from_json(j["rotation"]);
    return p;
}

Shape shape_from_json(const Json& j) {
    const std::string type = string_field(j, "type");
    if (type == "box") return Box{vec3_from_json(field(j, "half_extents"))};
    if (type == "sphere") return Sphere{number_field(j, "radius")};
    if (type == "cylinder") return Cylinder{number_field(j, "radius"), number_field(j, "half_height")};
    throw CodecError("unknown shape type '" + type + "'");
}

CollisionObject object_from_json(const Json& j) {
    CollisionObject o;
    o.id = string_field(j, "id");
    o.shape = shape_from_json(field(j, "shape"));
    o.pose = pose_from_json(field(j, "pose"));
    if (j.contains("metadata")) {
        const Json& m = j["metadata"];
        if (!m.is_object()) throw CodecError("'metadata' must be an object of strings");
        for (const auto& [k, v] : m.items()) {
            if (!v.is_string()) throw CodecError("metadata values must be strings");
            o.metadata[k] = v.get<std::string>();
        }
    }
    return o;
}

SceneOp op_from_json(const Json& j) {
    const std::string op = string_field(j, "op");
    if (op == "add_object") return diff::AddObject{object_from_json(field(j, "object"))};
    if (op == "remove_object") return diff::RemoveObject{string_field(j, "id")};
    if (op == "move_object") return diff::MoveObject{string_field(j, "id"), pose_from_json(field(j, "pose"))};
    if (op == "set_joint_state") return diff::SetJointState{config_from_json(field(j, "q"))};
    if (op == "attach") return diff::Attach{string_field(j, "object_id"), index_field(j, "link_index")};
    if (op == "detach") {
        diff::Detach d{string_field(j, "object_id"), std::nullopt};
        if (j.contains("drop_pose") && !j["drop_pose"].is_null()) d.drop_pose = pose_from_json(j["drop_pose"]);
        return d;
    }
    throw CodecError("unknown diff op '" + op + "'");
}

SceneDiff diff_from_json(const Json& j) {
    const Json& ops = field(j, "ops");
    if (!ops.is_array()) throw CodecError("'ops' must be an array");
    SceneDiff d;
    for (const auto& op : ops) d.ops.push_back(op_from_json(op));
    return d;
}

Goal goal_from_json(const Json& j) {
    const std::string type = string_field(j, "type");
    if (type == "joint") return JointGoal{config_from_json(field(j, "q"))};
    if (type == "pose") {
        PoseGoal g{pose_from_json(field(j, "target")), false};
        if (j.contains("position_only")) g.position_only = bool_field(j, "position_only");
        return g;
    }
    throw CodecError("unknown goal type '" + type + "'");
}

PlanParams params_from_json(const Json& j) {
    PlanParams p;
    if (j.is_null()) return p;
    if (!j.is_object()) throw CodecError("'params' must be an object");
    auto num = [&](const char* k, double& out) {
        if (j.contains(k)) out = number_field(j, k);
    };
    auto integer = [&](const char* k, int& out) {
        if (!j.contains(k)) return;
        if (!j[k].is_number_integer()) throw CodecError(std::string("'") + k + "' must be an integer");
        out = j[k].get<int>();
    };
    num("step_size", p.step_size);
    num("goal_bias", p.goal_bias);
    num("motion_step", p.motion_step);
    integer("prm_samples", p.prm_samples);
    integer("prm_k", p.prm_k);
    num("rewire_radius", p.rewire_radius);
    integer("max_iterations", p.max_iterations);
    integer("rrt_star_iterations", p.rrt_star_iterations);
    return p;
}

PlanRequest request_from_json(const Json& j) {
    PlanRequest r;
    r.scene_revision = u64_field(j, "scene_revision");
    r.start = config_from_json(field(j, "start"));
    r.goal = goal_from_json(field(j, "goal"));
    const std::string planner = string_field(j, "planner");
    const auto k = planner_from_string(planner);
    if (!k) throw CodecError("unknown planner '" + planner + "'");
    r.planner = *k;
    r.seed = u64_field(j, "seed");
    r.time_budget = number_field(j, "time_budget");
    if (j.contains("params")) r.params = params_from_json(j["params"]);
    return r;
}

Path path_from_json(const Json& j) {
    const Json& w = field(j, "waypoints");
    if (!w.is_array()) throw CodecError("'waypoints' must be an array");
    Path p;
    for (const auto& q : w) p.waypoints.push_back(config_from_json(q));
    return p;
}

Trajectory trajectory_from_json(const Json& j) {
    const Json& pts = field(j, "points");
    if (!pts.is_array()) throw CodecError("'points' must be an array");
    Trajectory t;
    for (const auto& p : pts) {
        t.points.push_back({number_field(p, "t"), config_from_json(field(p, "q")), config_from_json(field(p, "qdot"))});
    }
    t.total_duration = number_field(j, "total_duration");
    return t;
}

PlanningScene scene_from_json(const Json& j) {
    PlanningScene s;
    s.revision = u64_field(j, "revision");
    const Json& robot = field(j, "robot");
    s.robot_id = string_field(robot, "id");
    std::vector<Joint> joints;
    std::vector<Shape> shapes;
    const Json& js = field(robot, "joints");
    if (!js.is_array()) throw CodecError("'joints' must be an array");
    for (const auto& jj : js) {
        Joint joint;
        joint.name = string_field(jj, "name");
        const std::string kind = string_field(jj, "kind");
        if (kind == "revolute") joint.kind = JointKind::revolute;
        else if (kind == "prismatic") joint.kind = JointKind::prismatic;
        else throw CodecError("unknown joint kind '" + kind + "'");
        joint.axis = vec3_from_json(field(jj, "axis"));
        joint.origin = pose_from_json(field(jj, "origin"));
        joint.lower = number_field(jj, "lower");
        joint.upper = number_field(jj, "upper");
        joint.vel_limit = number_field(jj, "vel_limit");
        joint.acc_limit = number_field(jj, "acc_limit");
        joints.push_back(std::move(joint));
        shapes.push_back(shape_from_json(field(jj, "link_shape")));
        s.link_ids.push_back(string_field(jj, "link_id"));
    }
    try {
        s.robot = std::make_shared<const RobotModel>(pose_from_json(field(robot, "base_pose")), std::move(joints),
                                                     std::move(shapes));
    } catch (const std::invalid_argument& e) {
        throw CodecError(std::string("invalid robot: ") + e.what());
    }
    s.current_q = config_from_json(field(j, "current_q"));
    if (static_cast<std::size_t>(s.current_q.size()) != s.robot->dof())
        throw CodecError("'current_q' has the wrong dimension");
    for (const auto& o : field(j, "objects")) {
        CollisionObject obj = object_from_json(o);
        s.obstacles.emplace(obj.id, std::move(obj));
    }
    for (const auto& a : field(j, "attached")) {
        s.attached.push_back({object_from_json(field(a, "object")), index_field(a, "link_index"),
                              pose_from_json(field(a, "grasp_pose"))});
    }
    const Json& acm = field(j, "acm");
    for (const auto& p : field(acm, "pairs")) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string())
            throw CodecError("ACM pairs must be [id, id]");
        s.acm.allow(p[0].get<std::string>(), p[1].get<std::string>());
    }
    for (const auto& g : field(acm, "global")) {
        if (!g.is_string()) throw CodecError("ACM global entries must be ids");
        s.acm.allow_everything(g.get<std::string>());
    }
    s.margin = number_field(j, "margin");
    return s;
}

}  // namespace dtwin
