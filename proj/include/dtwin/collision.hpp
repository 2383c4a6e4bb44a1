#pragma once

#include "dtwin/geometry.hpp"

namespace dtwin {

inline constexpr double kDefaultCollisionMargin = 0.005;
inline constexpr double kGjkTolerance = 1e-9;
inline constexpr int kGjkMaxIterations = 64;

struct Aabb {
    Vec3 min;
    Vec3 max;
};

Aabb posed_aabb(const Shape& s, const Pose& p);

/// World-space support point of a posed shape in direction `dir`.
Vec3 support_point(const Shape& s, const Pose& p, const Vec3& dir);

struct GjkResult {
    bool intersecting = false;  ///< cores overlap (or the iteration did not converge)
    bool converged = true;
    double distance = 0.0;      ///< distance between the shapes, 0 when intersecting
    int iterations = 0;
};

/// Distance between two posed convex shapes. If `early_exit` is positive the
/// iteration stops as soon as the distance is proven to exceed it, in which
/// case `distance` is only a lower bound greater than `early_exit`.
GjkResult gjk_distance(const Shape& sa, const Pose& pa, const Shape& sb, const Pose& pb, double early_exit = 0.0);

/// True iff the two shapes, each inflated by margin/2, intersect.
bool shapes_collide(const Shape& sa, const Pose& pa, const Shape& sb, const Pose& pb, double margin);

/// Distance between the shapes (0 when they intersect or GJK fails to converge).
double shape_distance(const Shape& sa, const Pose& pa, const Shape& sb, const Pose& pb);

}  // namespace dtwin
