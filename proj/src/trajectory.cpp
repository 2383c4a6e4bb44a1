#include "dtwin/trajectory.hpp"

#include "dtwin/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dtwin {

Path shortcut_smooth(const Path& path, const PlanningScene& scene, std::uint64_t seed, int iterations,
                     double motion_step) {
    Path out = path;
    if (iterations <= 0 || out.waypoints.size() < 3) return out;
    const CollisionChecker checker(scene);
    CounterRng rng(seed);
    for (int it = 0; it < iterations; ++it) {
        auto& w = out.waypoints;
        if (w.size() < 3) break;
        const double span = static_cast<double>(w.size() - 1);
        double u = rng.uniform() * span;
        double v = rng.uniform() * span;
        if (u > v) std::swap(u, v);
        const auto i = static_cast<std::size_t>(u);
        const auto j = static_cast<std::size_t>(v);
        if (i == j) continue;
        JointConfig a = w[i] + (w[i + 1] - w[i]) * (u - static_cast<double>(i));
        JointConfig b = w[j] + (w[j + 1] - w[j]) * (v - static_cast<double>(j));
        // Snap cut points onto nearby waypoints so no sliver segments appear.
        auto snap = [](JointConfig& x, const JointConfig& l, const JointConfig& r) {
            constexpr double tol = 1e-3;
            if ((x - l).cwiseAbs().maxCoeff() < tol) x = l;
            else if ((x - r).cwiseAbs().maxCoeff() < tol) x = r;
        };
        snap(a, w[i], w[i + 1]);
        snap(b, w[j], w[j + 1]);
        if (a == b) continue;

        std::vector<JointConfig> next(w.begin(), w.begin() + static_cast<long>(i) + 1);
        if (a != next.back()) next.push_back(a);
        if (b != next.back()) next.push_back(b);
        for (std::size_t k = j + 1; k < w.size(); ++k) {
            if (k == j + 1 && w[k] == next.back()) continue;
            next.push_back(w[k]);
        }
        Path candidate{std::move(next)};
        if (!(path_length(candidate) < path_length(out))) continue;
        if (!checker.segment_clear(a, b, motion_step)) continue;
        out = std::move(candidate);
    }
    return out;
}

Path interpolate(const Path& path, double max_step) {
    if (!(max_step > 0)) throw std::invalid_argument("max_step must be positive");
    if (path.waypoints.size() < 2) return path;
    Path out;
    out.waypoints.push_back(path.waypoints.front());
    for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
        const JointConfig& a = path.waypoints[i - 1];
        const JointConfig& b = path.waypoints[i];
        const double d = (b - a).cwiseAbs().maxCoeff();
        const long n = std::max(1L, static_cast<long>(std::ceil(d / max_step)));
        for (long k = 1; k < n; ++k) out.waypoints.push_back(a + (b - a) * (static_cast<double>(k) / n));
        out.waypoints.push_back(b);
    }
    return out;
}

double segment_duration(double s, double v, double a) {
    if (!(s > 0)) return 0.0;
    if (s * a <= v * v) return 2.0 * std::sqrt(s / a);
    return s / v + v / a;
}

namespace {

struct Segment {
    JointConfig from;
    JointConfig to;
    JointConfig delta;
    double s;      // max-norm length
    double v;      // scalar velocity limit along s
    double a;      // scalar acceleration limit along s
    double t0;
    double duration;
    double t_acc;  // length of the acceleration phase
    double v_peak;

    // Distance travelled and speed along s at local time tau.
    std::pair<double, double> profile(double tau) const {
        tau = std::clamp(tau, 0.0, duration);
        if (tau <= t_acc) return {0.5 * a * tau * tau, a * tau};
        const double t_dec = duration - t_acc;
        if (tau <= t_dec) return {0.5 * a * t_acc * t_acc + v_peak * (tau - t_acc), v_peak};
        const double r = duration - tau;
        return {s - 0.5 * a * r * r, a * r};
    }
};

}  // namespace

Trajectory time_parameterize(const Path& path, const RobotModel& model) {
    Trajectory traj;
    if (path.waypoints.empty()) return traj;
    const auto dof = static_cast<Eigen::Index>(model.dof());
    for (const auto& w : path.waypoints) {
        if (w.size() != dof) throw DimensionMismatch("waypoint dimension does not match the robot");
    }
    const JointConfig zero = JointConfig::Zero(dof);

    std::vector<Segment> segs;
    double t = 0.0;
    for (std::size_t i = 1; i < path.waypoints.size(); ++i) {
        const JointConfig delta = path.waypoints[i] - path.waypoints[i - 1];
        const double s = delta.cwiseAbs().maxCoeff();
        if (!(s > 0)) continue;
        double v = std::numeric_limits<double>::infinity();
        double a = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < dof; ++j) {
            const double dq = std::abs(delta[j]);
            if (dq == 0) continue;
            const Joint& jt = model.joints()[static_cast<std::size_t>(j)];
            v = std::min(v, jt.vel_limit * (s / dq));
            a = std::min(a, jt.acc_limit * (s / dq));
        }
        Segment seg{path.waypoints[i - 1], path.waypoints[i], delta, s, v, a, t, 0, 0, 0};
        if (s * a <= v * v) {
            seg.t_acc = std::sqrt(s / a);
            seg.v_peak = a * seg.t_acc;
            seg.duration = 2.0 * seg.t_acc;
        } else {
            seg.t_acc = v / a;
            seg.v_peak = v;
            seg.duration = s / v + v / a;
        }
        t += seg.duration;
        segs.push_back(std::move(seg));
    }

    traj.points.push_back({0.0, path.waypoints.front(), zero});
    const double dt = 1.0 / kTrajectorySampleRate;
    // Grid samples closer than this to a waypoint time are dropped so that
    // finite differences stay well conditioned.
    const double guard = 1e-3;
    for (std::size_t k = 0; k < segs.size(); ++k) {
        const Segment& seg = segs[k];
        const double t1 = seg.t0 + seg.duration;
        for (auto g = static_cast<long>(std::floor(seg.t0 / dt)) + 1;; ++g) {
            const double tg = static_cast<double>(g) * dt;
            if (tg >= t1 - guard) break;
            if (tg <= seg.t0 + guard) continue;
            const auto [dist, speed] = seg.profile(tg - seg.t0);
            traj.points.push_back({tg, seg.from + seg.delta * (dist / seg.s), seg.delta * (speed / seg.s)});
        }
        traj.points.push_back({t1, seg.to, zero});
    }
    traj.total_duration = t;
    return traj;
}

JointConfig sample_trajectory(const Trajectory& traj, double t) {
    if (traj.points.empty()) throw std::invalid_argument("empty trajectory");
    if (t <= traj.points.front().t) return traj.points.front().q;
    if (t >= traj.points.back().t) return traj.points.back().q;
    const auto it = std::upper_bound(traj.points.begin(), traj.points.end(), t,
                                     [](double x, const TrajectoryPoint& p) { return x < p.t; });
    const TrajectoryPoint& b = *it;
    const TrajectoryPoint& a = *(it - 1);
    const double u = (t - a.t) / (b.t - a.t);
    return a.q + (b.q - a.q) * u;
}

}  // namespace dtwin
