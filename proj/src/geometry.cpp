#include "dtwin/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace dtwin {

UnitQuat UnitQuat::from_coeffs(double w, double x, double y, double z) {
    const Eigen::Quaterniond q(w, x, y, z);
    if (std::abs(q.squaredNorm() - 1.0) <= 1e-12) return UnitQuat(Raw{}, q);
    return UnitQuat(q);
}


UnitQuat UnitQuat::from_axis_angle(const Vec3& axis, double angle) {
    return UnitQuat(Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())));
}

UnitQuat UnitQuat::from_rpy(double roll, double pitch, double yaw) {
    const Eigen::Quaterniond q = Eigen::AngleAxisd(yaw, Vec3::UnitZ()) * Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                                 Eigen::AngleAxisd(roll, Vec3::UnitX());
    return UnitQuat(q);
}

Vec3 UnitQuat::log() const {
    // Use the hemisphere with w >= 0 so the angle is in [0, pi].
    Eigen::Quaterniond q = q_;
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Vec3 v(q.x(), q.y(), q.z());
    const double s = v.norm();
    if (s < 1e-12) return 2.0 * v;  // small-angle limit
    const double angle = 2.0 * std::atan2(s, q.w());
    return v * (angle / s);
}

double angular_distance(const UnitQuat& a, const UnitQuat& b) {
    const double d = std::abs(a.eigen().dot(b.eigen()));
    return 2.0 * std::acos(std::min(1.0, d));
}

Pose pose_compose(const Pose& a, const Pose& b) {
    return {a.translation + a.rotation.rotate(b.translation), a.rotation * b.rotation};
}

Pose pose_inverse(const Pose& p) {
    const UnitQuat inv = p.rotation.conjugate();
    return {-inv.rotate(p.translation), inv};
}

bool shape_dimensions_positive(const Shape& s) {
    return std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Box>) {
                return v.half_extents.x() > 0 && v.half_extents.y() > 0 && v.half_extents.z() > 0;
            } else if constexpr (std::is_same_v<T, Sphere>) {
                return v.radius > 0;
            } else {
                return v.radius > 0 && v.half_height > 0;
            }
        },
        s);
}

double bounding_radius(const Shape& s) {
    return std::visit(
        [](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Box>) {
                return v.half_extents.norm();
            } else if constexpr (std::is_same_v<T, Sphere>) {
                return v.radius;
            } else {
                return std::hypot(v.radius, v.half_height);
            }
        },
        s);
}

}  // namespace dtwin
