#pragma once

#include "dtwin/geometry.hpp"

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace dtwin {

/// Joint values: radians for revolute joints, meters for prismatic ones.
using JointConfig = Eigen::VectorXd;
using Jacobian = Eigen::Matrix<double, 6, Eigen::Dynamic>;

enum class JointKind { revolute, prismatic };

struct Joint {
    std::string name;
    JointKind kind = JointKind::revolute;
    Vec3 axis = Vec3::UnitZ();  ///< unit axis in the parent link frame
    Pose origin;                ///< fixed offset from the joint to this link's frame, applied after the motion
    double lower = 0.0;
    double upper = 0.0;
    double vel_limit = 1.0;
    double acc_limit = 1.0;
};

/// Serial chain. Link i's frame is
///   frame(i) = frame(i-1) * motion_i(q_i) * origin_i,   frame(0) = base
/// so the link spans from the joint to the origin of its own frame, and the
/// last link frame is the end-effector.
class RobotModel {
public:
    RobotModel() = default;
    /// Throws std::invalid_argument if the invariants do not hold.
    RobotModel(Pose base, std::vector<Joint> joints, std::vector<Shape> link_shapes);

    std::size_t dof() const { return joints_.size(); }
    const Pose& base_pose() const { return base_; }
    const std::vector<Joint>& joints() const { return joints_; }
    const std::vector<Shape>& link_shapes() const { return link_shapes_; }

    JointConfig lower_limits() const;
    JointConfig upper_limits() const;
    bool within_limits(const JointConfig& q) const;
    JointConfig clamp(const JointConfig& q) const;

    /// Sum of the link offsets. Bounds the reach of the end-effector from the first joint.
    double total_length() const;

private:
    Pose base_;
    std::vector<Joint> joints_;
    std::vector<Shape> link_shapes_;
};

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ChainPoses {
    std::vector<Pose> joint_frames;  ///< frame(i-1) * motion_i(q_i)
    std::vector<Pose> link_frames;   ///< frame(i)
    std::vector<Pose> shape_poses;   ///< collision shape i, centered on the link segment
};

ChainPoses chain_poses(const RobotModel& model, const JointConfig& q);

/// One base-frame pose per link.
std::vector<Pose> forward_kinematics(const RobotModel& model, const JointConfig& q);

Pose end_effector_pose(const RobotModel& model, const JointConfig& q);

/// Geometric Jacobian of the end-effector: rows 0-2 linear, rows 3-5 angular.
Jacobian jacobian(const RobotModel& model, const JointConfig& q);

struct IkOptions {
    double position_tolerance = 1e-4;
    double rotation_tolerance = 1e-3;
    int max_iterations = 200;
    double damping = 0.05;
    double max_step = 0.2;
    bool position_only = false;
};

class Unreachable : public std::runtime_error {
public:
    Unreachable(JointConfig best, double position_residual, double rotation_residual);
    JointConfig best;
    double position_residual;
    double rotation_residual;
};

struct IkResidual {
    double position;
    double rotation;
};

IkResidual ik_residual(const RobotModel& model, const JointConfig& q, const Pose& target);

/// Damped least squares. Throws Unreachable when the tolerance is not met.
JointConfig solve_ik(const RobotModel& model, const Pose& target, const JointConfig& seed, const IkOptions& opts = {});

}  // namespace dtwin
