#pragma once

#include <Eigen/Geometry>

#include <map>
#include <string>
#include <variant>

namespace dtwin {

using Vec3 = Eigen::Vector3d;

/// Unit quaternion. Every constructing operation renormalizes.
class UnitQuat {
public:
    UnitQuat() : q_(Eigen::Quaterniond::Identity()) {}
    explicit UnitQuat(const Eigen::Quaterniond& q) : q_(q.normalized()) {}
    UnitQuat(double w, double x, double y, double z) : q_(Eigen::Quaterniond(w, x, y, z).normalized()) {}

    static UnitQuat identity() { return {}; }
    /// Keeps the coefficients bit for bit when they are already unit within
    /// 1e-12, so decoded values compare equal to the encoded ones.
    static UnitQuat from_coeffs(double w, double x, double y, double z);
    static UnitQuat from_axis_angle(const Vec3& axis, double angle);
    /// Z-Y-X convention: R = Rz(yaw) * Ry(pitch) * Rx(roll). Radians.
    static UnitQuat from_rpy(double roll, double pitch, double yaw);

    double w() const { return q_.w(); }
    double x() const { return q_.x(); }
    double y() const { return q_.y(); }
    double z() const { return q_.z(); }

    const Eigen::Quaterniond& eigen() const { return q_; }
    Eigen::Matrix3d matrix() const { return q_.toRotationMatrix(); }
    UnitQuat conjugate() const { return UnitQuat(q_.conjugate()); }
    Vec3 rotate(const Vec3& v) const { return q_ * v; }

    /// Rotation vector (axis * angle) with angle in [0, pi].
    Vec3 log() const;

    friend UnitQuat operator*(const UnitQuat& a, const UnitQuat& b) { return UnitQuat(a.q_ * b.q_); }
    friend bool operator==(const UnitQuat& a, const UnitQuat& b) { return a.q_.coeffs() == b.q_.coeffs(); }

private:
    struct Raw {};
    UnitQuat(Raw, const Eigen::Quaterniond& q) : q_(q) {}
    Eigen::Quaterniond q_;
};

/// Geodesic angle between two orientations, in [0, pi].
double angular_distance(const UnitQuat& a, const UnitQuat& b);

struct Pose {
    Vec3 translation = Vec3::Zero();
    UnitQuat rotation;

    static Pose identity() { return {}; }
    static Pose from_translation(const Vec3& t) { return {t, UnitQuat::identity()}; }

    Vec3 apply(const Vec3& p) const { return translation + rotation.rotate(p); }

    friend bool operator==(const Pose& a, const Pose& b) {
        return a.translation == b.translation && a.rotation == b.rotation;
    }
};

/// a ∘ b: b is expressed in a's frame.
Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& p);

inline Pose operator*(const Pose& a, const Pose& b) { return pose_compose(a, b); }

struct Box {
    Vec3 half_extents;
    friend bool operator==(const Box&, const Box&) = default;
};

struct Sphere {
    double radius;
    friend bool operator==(const Sphere&, const Sphere&) = default;
};

/// Axis along local z.
struct Cylinder {
    double radius;
    double half_height;
    friend bool operator==(const Cylinder&, const Cylinder&) = default;
};

using Shape = std::variant<Box, Sphere, Cylinder>;

bool shape_dimensions_positive(const Shape& s);

/// Radius of the smallest origin-centered sphere enclosing the shape.
double bounding_radius(const Shape& s);

struct CollisionObject {
    std::string id;
    Shape shape;
    Pose pose;
    std::map<std::string, std::string> metadata;

    friend bool operator==(const CollisionObject&, const CollisionObject&) = default;
};

}  // namespace dtwin
