#include "dtwin/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dtwin {

RobotModel::RobotModel(Pose base, std::vector<Joint> joints, std::vector<Shape> link_shapes)
    : base_(std::move(base)), joints_(std::move(joints)), link_shapes_(std::move(link_shapes)) {
    if (joints_.size() != link_shapes_.size()) throw std::invalid_argument("joint count must equal link count");
    for (auto& j : joints_) {
        const double n = j.axis.norm();
        if (!(n > 0)) throw std::invalid_argument("joint '" + j.name + "' has a zero axis");
        j.axis /= n;
        if (!(j.lower < j.upper)) throw std::invalid_argument("joint '" + j.name + "' needs lower < upper");
        if (!(j.vel_limit > 0) || !(j.acc_limit > 0))
            throw std::invalid_argument("joint '" + j.name + "' needs positive vel/acc limits");
    }
    for (const auto& s : link_shapes_) {
        if (!shape_dimensions_positive(s)) throw std::invalid_argument("link shape dimensions must be positive");
    }
}

JointConfig RobotModel::lower_limits() const {
    JointConfig q(dof());
    for (std::size_t i = 0; i < dof(); ++i) q[i] = joints_[i].lower;
    return q;
}

JointConfig RobotModel::upper_limits() const {
    JointConfig q(dof());
    for (std::size_t i = 0; i < dof(); ++i) q[i] = joints_[i].upper;
    return q;
}

bool RobotModel::within_limits(const JointConfig& q) const {
    if (static_cast<std::size_t>(q.size()) != dof()) return false;
    for (std::size_t i = 0; i < dof(); ++i) {
        if (!(q[i] >= joints_[i].lower && q[i] <= joints_[i].upper)) return false;
    }
    return true;
}

JointConfig RobotModel::clamp(const JointConfig& q) const {
    JointConfig out = q;
    for (std::size_t i = 0; i < dof(); ++i) out[i] = std::clamp(q[i], joints_[i].lower, joints_[i].upper);
    return out;
}

double RobotModel::total_length() const {
    double sum = 0.0;
    for (const auto& j : joints_) sum += j.origin.translation.norm();
    return sum;
}

namespace {

void check_dims(const RobotModel& model, const JointConfig& q) {
    if (static_cast<std::size_t>(q.size()) != model.dof()) {
        throw DimensionMismatch("joint config has " + std::to_string(q.size()) + " values, robot has " +
                                std::to_string(model.dof()) + " joints");
    }
}

Pose joint_motion(const Joint& j, double value) {
    if (j.kind == JointKind::revolute) return {Vec3::Zero(), UnitQuat::from_axis_angle(j.axis, value)};
    return Pose::from_translation(j.axis * value);
}

}  // namespace

ChainPoses chain_poses(const RobotModel& model, const JointConfig& q) {
    check_dims(model, q);
    ChainPoses out;
    const std::size_t n = model.dof();
    out.joint_frames.reserve(n);
    out.link_frames.reserve(n);
    out.shape_poses.reserve(n);
    Pose frame = model.base_pose();
    for (std::size_t i = 0; i < n; ++i) {
        const Joint& j = model.joints()[i];
        const Pose jf = frame * joint_motion(j, q[i]);
        frame = jf * j.origin;
        out.joint_frames.push_back(jf);
        out.link_frames.push_back(frame);
        out.shape_poses.push_back(jf * Pose::from_translation(0.5 * j.origin.translation));
    }
    return out;
}

std::vector<Pose> forward_kinematics(const RobotModel& model, const JointConfig& q) {
    return chain_poses(model, q).link_frames;
}

Pose end_effector_pose(const RobotModel& model, const JointConfig& q) {
    const auto frames = forward_kinematics(model, q);
    return frames.empty() ? model.base_pose() : frames.back();
}

Jacobian jacobian(const RobotModel& model, const JointConfig& q) {
    const ChainPoses cp = chain_poses(model, q);
    const std::size_t n = model.dof();
    Jacobian jac = Jacobian::Zero(6, static_cast<Eigen::Index>(n));
    if (n == 0) return jac;
    const Vec3 p_end = cp.link_frames.back().translation;
    for (std::size_t i = 0; i < n; ++i) {
        const Joint& j = model.joints()[i];
        // The motion axis is invariant under its own rotation, so the joint
        // frame's orientation maps it to world.
        const Vec3 axis = cp.joint_frames[i].rotation.rotate(j.axis);
        const auto col = static_cast<Eigen::Index>(i);
        if (j.kind == JointKind::revolute) {
            jac.block<3, 1>(0, col) = axis.cross(p_end - cp.joint_frames[i].translation);
            jac.block<3, 1>(3, col) = axis;
        } else {
            jac.block<3, 1>(0, col) = axis;
        }
    }
    return jac;
}

Unreachable::Unreachable(JointConfig best_q, double pos, double rot)
    : std::runtime_error("IK did not converge (position residual " + std::to_string(pos) + " m, rotation residual " +
                         std::to_string(rot) + " rad)"),
      best(std::move(best_q)),
      position_residual(pos),
      rotation_residual(rot) {}

IkResidual ik_residual(const RobotModel& model, const JointConfig& q, const Pose& target) {
    const Pose ee = end_effector_pose(model, q);
    return {(target.translation - ee.translation).norm(), angular_distance(target.rotation, ee.rotation)};
}

JointConfig solve_ik(const RobotModel& model, const Pose& target, const JointConfig& seed, const IkOptions& opts) {
    check_dims(model, seed);
    const auto n = static_cast<Eigen::Index>(model.dof());
    const Eigen::Index rows = opts.position_only ? 3 : 6;
    JointConfig q = model.clamp(seed);

    JointConfig best = q;
    double best_score = std::numeric_limits<double>::infinity();
    IkResidual best_res{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};

    for (int iter = 0; iter <= opts.max_iterations; ++iter) {
        const Pose ee = end_effector_pose(model, q);
        Eigen::Matrix<double, 6, 1> err;
        err.head<3>() = target.translation - ee.translation;
        err.tail<3>() = (target.rotation * ee.rotation.conjugate()).log();

        const IkResidual res{err.head<3>().norm(), opts.position_only ? 0.0 : err.tail<3>().norm()};
        const double score = res.position + res.rotation;
        if (score < best_score) {
            best_score = score;
            best = q;
            best_res = res;
        }
        if (res.position <= opts.position_tolerance && res.rotation <= opts.rotation_tolerance) return q;
        if (iter == opts.max_iterations || n == 0) break;

        const Eigen::MatrixXd jac = jacobian(model, q).topRows(rows);
        const Eigen::VectorXd e = err.head(rows);
        // Damping fades out once the residual is smaller than it, which keeps
        // convergence fast next to singular (fully stretched) configurations.
        const double lambda2 = std::max(std::min(opts.damping * opts.damping, e.squaredNorm()), 1e-12);
        const Eigen::MatrixXd jjt = jac * jac.transpose() + lambda2 * Eigen::MatrixXd::Identity(rows, rows);
        Eigen::VectorXd dq = jac.transpose() * jjt.ldlt().solve(e);
        const double step = dq.cwiseAbs().maxCoeff();
        if (step > opts.max_step) dq *= opts.max_step / step;
        // Backtrack so the weighted error never grows; plain DLS oscillates
        // around the stretched pose when the target is out of reach.
        const double current = e.squaredNorm();
        JointConfig next = model.clamp(q + dq);
        for (int k = 0; k < 12; ++k) {
            const Pose np = end_effector_pose(model, next);
            Eigen::Matrix<double, 6, 1> ne;
            ne.head<3>() = target.translation - np.translation;
            ne.tail<3>() = (target.rotation * np.rotation.conjugate()).log();
            if (ne.head(rows).squaredNorm() < current) break;
            dq /= 2;
            next = model.clamp(q + dq);
        }
        q = next;
    }
    if (opts.position_only) best_res.rotation = ik_residual(model, best, target).rotation;
    throw Unreachable(best, best_res.position, best_res.rotation);
}

}  // namespace dtwin
