#include "dtwin/planning_scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dtwin {

namespace {
std::pair<std::string, std::string> ordered(const std::string& a, const std::string& b) {
    return a < b ? std::pair{a, b} : std::pair{b, a};
}
}  // namespace

void AllowedCollisionMatrix::allow(const std::string& a, const std::string& b) { pairs_.insert(ordered(a, b)); }

void AllowedCollisionMatrix::allow_everything(const std::string& id) { global_.insert(id); }

void AllowedCollisionMatrix::forget(const std::string& id) {
    global_.erase(id);
    std::erase_if(pairs_, [&](const auto& p) { return p.first == id || p.second == id; });
}

bool AllowedCollisionMatrix::allowed(const std::string& a, const std::string& b) const {
    return global_.contains(a) || global_.contains(b) || pairs_.contains(ordered(a, b));
}

bool PlanningScene::is_zone(const std::string& id) const {
    const auto it = obstacles.find(id);
    if (it == obstacles.end()) return false;
    const auto kind = it->second.metadata.find("kind");
    return kind != it->second.metadata.end() && kind->second == "zone";
}

const AttachedObject* PlanningScene::find_attached(const std::string& id) const {
    for (const auto& a : attached) {
        if (a.object.id == id) return &a;
    }
    return nullptr;
}

PlanningScene from_scene_model(const SceneModel& m, std::uint64_t revision) {
    PlanningScene s;
    s.robot_id = m.robot_id;
    s.robot = std::make_shared<const RobotModel>(m.robot);
    s.link_ids = m.link_ids;
    s.current_q = m.robot.clamp(JointConfig::Zero(static_cast<Eigen::Index>(m.robot.dof())));
    for (const auto& o : m.obstacles) s.obstacles.emplace(o.id, o);
    for (const auto& z : m.zones) {
        s.obstacles.emplace(z.id, z);
        s.acm.allow_everything(z.id);
    }
    for (std::size_t i = 0; i + 1 < s.link_ids.size(); ++i) s.acm.allow(s.link_ids[i], s.link_ids[i + 1]);
    s.revision = revision;
    s.margin = m.collision_margin;
    return s;
}

const char* to_string(DiffErrorCode c) {
    switch (c) {
        case DiffErrorCode::unknown_id: return "unknown_id";
        case DiffErrorCode::duplicate_id: return "duplicate_id";
        case DiffErrorCode::attach_while_attached: return "attach_while_attached";
        case DiffErrorCode::detach_while_detached: return "detach_while_detached";
        case DiffErrorCode::invalid_link: return "invalid_link";
        case DiffErrorCode::dimension_mismatch: return "dimension_mismatch";
        case DiffErrorCode::invalid_shape: return "invalid_shape";
    }
    return "unknown";
}

Pose attached_world_pose(const PlanningScene& scene, const AttachedObject& a, const JointConfig& q) {
    return forward_kinematics(*scene.robot, q).at(a.link_index) * a.grasp_pose;
}

namespace {

struct DiffApplier {
    PlanningScene& s;

    bool is_link(const std::string& id) const {
        return std::find(s.link_ids.begin(), s.link_ids.end(), id) != s.link_ids.end();
    }

    void operator()(const diff::AddObject& op) {
        const std::string& id = op.object.id;
        if (id.empty()) throw DiffError(DiffErrorCode::unknown_id, "object id must not be empty");
        if (s.obstacles.contains(id) || s.find_attached(id) || is_link(id) || id == s.robot_id)
            throw DiffError(DiffErrorCode::duplicate_id, "object '" + id + "' already exists");
        if (!shape_dimensions_positive(op.object.shape))
            throw DiffError(DiffErrorCode::invalid_shape, "object '" + id + "' shape dimensions must be positive");
        s.obstacles.emplace(id, op.object);
        if (s.is_zone(id)) s.acm.allow_everything(id);
    }

    void operator()(const diff::RemoveObject& op) {
        if (s.obstacles.erase(op.id) == 0) {
            const auto it = std::find_if(s.attached.begin(), s.attached.end(),
                                         [&](const AttachedObject& a) { return a.object.id == op.id; });
            if (it == s.attached.end()) throw DiffError(DiffErrorCode::unknown_id, "unknown object '" + op.id + "'");
            s.attached.erase(it);
        }
        s.acm.forget(op.id);
    }

    void operator()(const diff::MoveObject& op) {
        const auto it = s.obstacles.find(op.id);
        if (it == s.obstacles.end()) {
            if (s.find_attached(op.id))
                throw DiffError(DiffErrorCode::attach_while_attached, "object '" + op.id + "' is attached to the robot");
            throw DiffError(DiffErrorCode::unknown_id, "unknown object '" + op.id + "'");
        }
        it->second.pose = op.pose;
    }

    void operator()(const diff::SetJointState& op) {
        if (static_cast<std::size_t>(op.q.size()) != s.robot->dof())
            throw DiffError(DiffErrorCode::dimension_mismatch, "joint state has the wrong dimension");
        if (!op.q.allFinite()) throw DiffError(DiffErrorCode::dimension_mismatch, "joint state must be finite");
        s.current_q = op.q;
    }

    void operator()(const diff::Attach& op) {
        if (s.find_attached(op.object_id))
            throw DiffError(DiffErrorCode::attach_while_attached, "object '" + op.object_id + "' is already attached");
        const auto it = s.obstacles.find(op.object_id);
        if (it == s.obstacles.end() || s.is_zone(op.object_id))
            throw DiffError(DiffErrorCode::unknown_id, "unknown object '" + op.object_id + "'");
        if (op.link_index >= s.robot->dof())
            throw DiffError(DiffErrorCode::invalid_link, "link index " + std::to_string(op.link_index) + " out of range");
        const Pose link_pose = forward_kinematics(*s.robot, s.current_q)[op.link_index];
        s.attached.push_back({it->second, op.link_index, pose_inverse(link_pose) * it->second.pose});
        s.obstacles.erase(it);
    }

    void operator()(const diff::Detach& op) {
        const auto it = std::find_if(s.attached.begin(), s.attached.end(),
                                     [&](const AttachedObject& a) { return a.object.id == op.object_id; });
        if (it == s.attached.end()) {
            if (s.obstacles.contains(op.object_id))
                throw DiffError(DiffErrorCode::detach_while_detached, "object '" + op.object_id + "' is not attached");
            throw DiffError(DiffErrorCode::unknown_id, "unknown object '" + op.object_id + "'");
        }
        CollisionObject obj = it->object;
        obj.pose = op.drop_pose ? *op.drop_pose : attached_world_pose(s, *it, s.current_q);
        s.attached.erase(it);
        s.obstacles.emplace(obj.id, std::move(obj));
    }
};

}  // namespace

PlanningScene apply_diff(const PlanningScene& scene, const SceneDiff& d) {
    PlanningScene next = scene;
    DiffApplier applier{next};
    for (const auto& op : d.ops) std::visit(applier, op);
    next.revision = scene.revision + 1;
    return next;
}

bool collision_equivalent(const PlanningScene& a, const PlanningScene& b) {
    auto solid = [](const PlanningScene& s) {
        std::vector<const CollisionObject*> out;
        for (const auto& [id, o] : s.obstacles) {
            if (!s.is_zone(id)) out.push_back(&o);
        }
        return out;
    };
    const auto sa = solid(a), sb = solid(b);
    if (sa.size() != sb.size()) return false;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        if (sa[i]->id != sb[i]->id || !(sa[i]->shape == sb[i]->shape) || !(sa[i]->pose == sb[i]->pose)) return false;
    }
    if (a.attached.size() != b.attached.size()) return false;
    for (std::size_t i = 0; i < a.attached.size(); ++i) {
        const auto& x = a.attached[i];
        const auto& y = b.attached[i];
        if (x.object.id != y.object.id || !(x.object.shape == y.object.shape) || x.link_index != y.link_index ||
            !(x.grasp_pose == y.grasp_pose))
            return false;
    }
    return a.acm == b.acm && a.margin == b.margin;
}

CollisionChecker::CollisionChecker(const PlanningScene& scene) : scene_(scene) {
    const RobotModel& robot = *scene.robot;
    const std::size_t n = robot.dof();
    std::vector<double> seg(n), slide(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const Joint& j = robot.joints()[k];
        seg[k] = j.origin.translation.norm();
        if (j.kind == JointKind::prismatic) slide[k] = std::max(std::abs(j.lower), std::abs(j.upper));
    }
    // Lever arm from joint jj to the carrying joint i of a body whose points
    // lie within `tail` of that joint.
    auto reach_for = [&](std::size_t i, double tail) {
        std::vector<double> r(n, 0.0);
        for (std::size_t jj = 0; jj <= i; ++jj) {
            if (robot.joints()[jj].kind == JointKind::prismatic) {
                r[jj] = 1.0;
                continue;
            }
            double sum = tail;
            for (std::size_t k = jj; k < i; ++k) sum += seg[k] + slide[k + 1];
            r[jj] = sum;
        }
        return r;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const Shape& sh = robot.link_shapes()[i];
        const double br = bounding_radius(sh);
        movers_.push_back({scene.link_ids.at(i), &sh, i, std::nullopt, br, reach_for(i, 0.5 * seg[i] + br)});
    }
    for (const auto& a : scene.attached) {
        const double br = bounding_radius(a.object.shape);
        movers_.push_back({a.object.id, &a.object.shape, a.link_index, a.grasp_pose, br,
                           reach_for(a.link_index, seg[a.link_index] + a.grasp_pose.translation.norm() + br)});
    }
    for (const auto& [id, obj] : scene.obstacles) {
        if (scene.acm.global().contains(id)) continue;
        fixed_.push_back({&obj, bounding_radius(obj.shape)});
    }
    for (std::size_t m = 0; m < movers_.size(); ++m) {
        for (std::size_t f = 0; f < fixed_.size(); ++f) {
            if (!scene.acm.allowed(movers_[m].id, fixed_[f].object->id)) mover_fixed_.emplace_back(m, f);
        }
        for (std::size_t k = m + 1; k < movers_.size(); ++k) {
            const Mover& a = movers_[m];
            const Mover& b = movers_[k];
            const bool both_links = !a.grasp && !b.grasp;
            if (both_links && (b.link - a.link) <= 1) continue;  // adjacent links
            if (a.grasp && !b.grasp && b.link == a.link) continue;  // carrier link
            if (b.grasp && !a.grasp && a.link == b.link) continue;
            if (!scene.acm.allowed(a.id, b.id)) mover_mover_.emplace_back(m, k);
        }
    }
}

void CollisionChecker::check_dims(const JointConfig& q) const {
    if (static_cast<std::size_t>(q.size()) != scene_.robot->dof())
        throw DimensionMismatch("joint config dimension does not match the robot");
}

void CollisionChecker::mover_poses(const JointConfig& q, std::vector<Pose>& out) const {
    const ChainPoses cp = chain_poses(*scene_.robot, q);
    out.resize(movers_.size());
    for (std::size_t m = 0; m < movers_.size(); ++m) {
        const Mover& mv = movers_[m];
        out[m] = mv.grasp ? cp.link_frames[mv.link] * *mv.grasp : cp.shape_poses[mv.link];
    }
}

bool CollisionChecker::state_valid(const JointConfig& q) const {
    check_dims(q);
    if (!scene_.robot->within_limits(q)) return false;
    std::vector<Pose> poses;
    mover_poses(q, poses);
    const double margin = scene_.margin;
    for (const auto& [m, f] : mover_fixed_) {
        const CollisionObject& o = *fixed_[f].object;
        if (shapes_collide(*movers_[m].shape, poses[m], o.shape, o.pose, margin)) return false;
    }
    for (const auto& [a, b] : mover_mover_) {
        if (shapes_collide(*movers_[a].shape, poses[a], *movers_[b].shape, poses[b], margin)) return false;
    }
    return true;
}

bool CollisionChecker::motion_valid(const JointConfig& a, const JointConfig& b, double step) const {
    check_dims(a);
    check_dims(b);
    if (!(step > 0)) throw std::invalid_argument("motion step must be positive");
    const double dist = (b - a).cwiseAbs().maxCoeff();
    if (!(dist > 0)) return state_valid(a);
    const auto n = static_cast<long>(std::ceil(dist / step));
    for (long i = 0; i <= n; ++i) {
        const JointConfig q = i == n ? b : JointConfig(a + (b - a) * (static_cast<double>(i) / n));
        if (!state_valid(q)) return false;
    }
    return true;
}

bool CollisionChecker::segment_clear(const JointConfig& a, const JointConfig& b, double max_stride) const {
    check_dims(a);
    check_dims(b);
    const RobotModel& robot = *scene_.robot;
    if (!robot.within_limits(a) || !robot.within_limits(b)) return false;
    const JointConfig delta = b - a;
    const double dist = delta.cwiseAbs().maxCoeff();
    const double stride = dist > 0 ? max_stride / dist : std::numeric_limits<double>::infinity();

    // Upper bound on how far any point of each body travels over the whole segment.
    std::vector<double> travel(movers_.size(), 0.0);
    for (std::size_t m = 0; m < movers_.size(); ++m) {
        for (std::size_t j = 0; j < robot.dof(); ++j) travel[m] += std::abs(delta[static_cast<Eigen::Index>(j)]) * movers_[m].reach[j];
    }

    const double margin = scene_.margin;
    std::vector<Pose> poses;
    double s = 0.0;
    while (true) {
        const JointConfig q = s >= 1.0 ? b : JointConfig(a + delta * s);
        mover_poses(q, poses);
        double ds = stride;

        auto visit_pair = [&](const Shape& sa, const Pose& pa, double ra, const Shape& sb, const Pose& pb, double rb,
                              double rate) {
            const double need = margin + clearance_floor + (std::isfinite(ds) ? ds * rate : 0.0);
            const double gap = (pa.translation - pb.translation).norm() - ra - rb;
            if (gap >= need && std::isfinite(ds)) return true;
            const GjkResult g = gjk_distance(sa, pa, sb, pb, std::isfinite(ds) ? need : -1.0);
            if (!g.converged || g.intersecting) return false;
            const double d = g.distance;
            if (d < margin + 2.0 * clearance_floor) return false;
            if (rate > 0) ds = std::min(ds, (d - margin - clearance_floor) / rate);
            return true;
        };

        for (const auto& [m, f] : mover_fixed_) {
            const CollisionObject& o = *fixed_[f].object;
            if (!visit_pair(*movers_[m].shape, poses[m], movers_[m].radius, o.shape, o.pose, fixed_[f].radius,
                            travel[m]))
                return false;
        }
        for (const auto& [x, y] : mover_mover_) {
            if (!visit_pair(*movers_[x].shape, poses[x], movers_[x].radius, *movers_[y].shape, poses[y],
                            movers_[y].radius, travel[x] + travel[y]))
                return false;
        }
        if (s >= 1.0 || !(dist > 0)) return true;
        s = std::min(1.0, s + ds);
    }
}

bool state_valid(const PlanningScene& scene, const JointConfig& q) { return CollisionChecker(scene).state_valid(q); }

bool motion_valid(const PlanningScene& scene, const JointConfig& a, const JointConfig& b, double step) {
    return CollisionChecker(scene).motion_valid(a, b, step);
}

}  // namespace dtwin
