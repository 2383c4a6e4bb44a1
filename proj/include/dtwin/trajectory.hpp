#pragma once

#include "dtwin/planners.hpp"

#include <cstdint>
#include <vector>

namespace dtwin {

struct TrajectoryPoint {
    double t = 0.0;
    JointConfig q;
    JointConfig qdot;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
    double total_duration = 0.0;
};

inline constexpr double kTrajectorySampleRate = 100.0;

/// Random shortcutting. New segments are accepted only if they are clear at
/// `motion_step` and do not lengthen the path.
Path shortcut_smooth(const Path& path, const PlanningScene& scene, std::uint64_t seed, int iterations,
                     double motion_step);

/// Splits every segment into ceil(d / max_step) equal pieces, d the max-norm length.
Path interpolate(const Path& path, double max_step);

/// Trapezoidal (or triangular) profile per segment, at rest at every
/// waypoint. Sampled at 100 Hz plus every waypoint time.
Trajectory time_parameterize(const Path& path, const RobotModel& model);

/// Duration of one rest-to-rest segment of max-norm length s under scalar
/// limits v and a.
double segment_duration(double s, double v, double a);

/// Linear interpolation between trajectory points, clamped at both ends.
JointConfig sample_trajectory(const Trajectory& traj, double t);

}  // namespace dtwin
