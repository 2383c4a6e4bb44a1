#pragma once

// Reference implementations used to check the library. None of them share
// code with the code under test beyond the value types.

#include "dtwin/planning_scene.hpp"
#include "dtwin/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace oracle {

using dtwin::Vec3;

/// Exact signed distance from a world point to a posed primitive.
inline double sdf(const dtwin::Shape& s, const dtwin::Pose& p, const Vec3& world) {
    const Vec3 x = p.rotation.conjugate().rotate(world - p.translation);
    if (const auto* b = std::get_if<dtwin::Box>(&s)) {
        const Vec3 d = x.cwiseAbs() - b->half_extents;
        return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
    }
    if (const auto* sp = std::get_if<dtwin::Sphere>(&s)) return x.norm() - sp->radius;
    const auto& c = std::get<dtwin::Cylinder>(s);
    const double dr = std::hypot(x.x(), x.y()) - c.radius;
    const double dz = std::abs(x.z()) - c.half_height;
    return std::hypot(std::max(dr, 0.0), std::max(dz, 0.0)) + std::min(std::max(dr, dz), 0.0);
}

inline double enclosing_radius(const dtwin::Shape& s) {
    if (const auto* b = std::get_if<dtwin::Box>(&s)) return b->half_extents.norm();
    if (const auto* sp = std::get_if<dtwin::Sphere>(&s)) return sp->radius;
    const auto& c = std::get<dtwin::Cylinder>(s);
    return std::hypot(c.radius, c.half_height);
}

/// min over points x of max(sdf_a(x), sdf_b(x)) - margin/2, found by
/// branch-and-bound over a grid refined around the joint-membership region.
/// Negative iff some point lies in both inflated shapes; for separated shapes
/// it is half their gap. Both SDFs are 1-Lipschitz, so a cell of half
/// diagonal h cannot go below (value at center) - h. Refinement stops once
/// the bracket [lower, upper] lies entirely below -band, above band, or
/// inside (-band, band), or is narrower than `precision`. band 0 disables
/// the band tests.
struct Overlap {
    double lower;
    double upper;
};

inline Overlap overlap_depth(const dtwin::Shape& sa, const dtwin::Pose& pa, const dtwin::Shape& sb,
                             const dtwin::Pose& pb, double margin, double band, double precision = 0.0) {
    auto f = [&](const Vec3& x) { return std::max(sdf(sa, pa, x), sdf(sb, pb, x)) - margin / 2; };
    const double ra = enclosing_radius(sa) + margin, rb = enclosing_radius(sb) + margin;
    Vec3 lo = (pa.translation.array() - ra).min(pb.translation.array() - rb);
    Vec3 hi = (pa.translation.array() + ra).max(pb.translation.array() + rb);
    struct Cell {
        Vec3 c;
        double h;  // half edge
        double lb;
    };
    auto cmp = [](const Cell& a, const Cell& b) { return a.lb > b.lb; };
    std::priority_queue<Cell, std::vector<Cell>, decltype(cmp)> open(cmp);
    double ub = std::numeric_limits<double>::infinity();
    auto push = [&](const Vec3& c, double h) {
        const double v = f(c);
        ub = std::min(ub, v);
        open.push({c, h, v - h * std::sqrt(3.0)});
    };
    const double h0 = (hi - lo).maxCoeff() / 2;
    const Vec3 c0 = (lo + hi) / 2;
    // Seed with an 8x8x8 grid.
    const int n = 8;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double h = h0 / n;
                push(c0 + Vec3(-h0 + (2 * i + 1) * h, -h0 + (2 * j + 1) * h, -h0 + (2 * k + 1) * h), h);
            }
    for (int it = 0; it < 2'000'000 && !open.empty(); ++it) {
        const Cell cell = open.top();
        const double lb = cell.lb;
        if (ub - lb < precision) return {lb, ub};
        if (band > 0 && (ub < -band || lb > band || (lb > -band && ub < band))) return {lb, ub};
        open.pop();
        if (cell.lb > ub) continue;
        const double h = cell.h / 2;
        for (int m = 0; m < 8; ++m)
            push(cell.c + Vec3((m & 1) ? h : -h, (m & 2) ? h : -h, (m & 4) ? h : -h), h);
    }
    return {open.empty() ? ub : open.top().lb, ub};
}

/// Separating axis test for two boxes (no margin). True iff they intersect.
inline bool sat_boxes_intersect(const dtwin::Box& a, const dtwin::Pose& pa, const dtwin::Box& b, const dtwin::Pose& pb) {
    const Eigen::Matrix3d ra = pa.rotation.matrix(), rb = pb.rotation.matrix();
    const Vec3 d = pb.translation - pa.translation;
    std::vector<Vec3> axes;
    for (int i = 0; i < 3; ++i) axes.push_back(ra.col(i));
    for (int i = 0; i < 3; ++i) axes.push_back(rb.col(i));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const Vec3 c = ra.col(i).cross(rb.col(j));
            if (c.norm() > 1e-9) axes.push_back(c.normalized());
        }
    for (const Vec3& ax : axes) {
        double ea = 0, eb = 0;
        for (int i = 0; i < 3; ++i) {
            ea += a.half_extents[i] * std::abs(ra.col(i).dot(ax));
            eb += b.half_extents[i] * std::abs(rb.col(i).dot(ax));
        }
        if (std::abs(d.dot(ax)) > ea + eb) return false;
    }
    return true;
}

/// Pairwise validity straight from forward kinematics and shapes_collide.
inline bool state_valid(const dtwin::PlanningScene& s, const dtwin::JointConfig& q) {
    const auto& robot = *s.robot;
    for (std::size_t j = 0; j < robot.dof(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        if (q[jj] < robot.joints()[j].lower || q[jj] > robot.joints()[j].upper) return false;
    }
    const dtwin::ChainPoses cp = dtwin::chain_poses(robot, q);
    struct Body {
        std::string id;
        const dtwin::Shape* shape;
        dtwin::Pose pose;
        int link;  // -1 for world objects
    };
    std::vector<Body> moving;
    for (std::size_t i = 0; i < robot.dof(); ++i)
        moving.push_back({s.link_ids[i], &robot.link_shapes()[i], cp.shape_poses[i], static_cast<int>(i)});
    for (const auto& a : s.attached)
        moving.push_back({a.object.id, &a.object.shape, cp.link_frames[a.link_index] * a.grasp_pose,
                          static_cast<int>(a.link_index)});
    for (std::size_t i = 0; i < moving.size(); ++i) {
        for (const auto& [id, obj] : s.obstacles) {
            if (s.acm.allowed(moving[i].id, id)) continue;
            if (dtwin::shapes_collide(*moving[i].shape, moving[i].pose, obj.shape, obj.pose, s.margin)) return false;
        }
        for (std::size_t j = i + 1; j < moving.size(); ++j) {
            if (s.acm.allowed(moving[i].id, moving[j].id)) continue;
            // An attached object rides on its link.
            const bool i_obj = i >= robot.dof(), j_obj = j >= robot.dof();
            if (i_obj != j_obj) {
                const Body& obj = i_obj ? moving[i] : moving[j];
                const Body& link = i_obj ? moving[j] : moving[i];
                if (obj.link == link.link) continue;
            }
            if (dtwin::shapes_collide(*moving[i].shape, moving[i].pose, *moving[j].shape, moving[j].pose, s.margin))
                return false;
        }
    }
    return true;
}

/// Straight-segment sweep with samples at most `step` apart, endpoints included.
inline bool motion_valid(const dtwin::PlanningScene& s, const dtwin::JointConfig& a, const dtwin::JointConfig& b,
                         double step) {
    const double d = (b - a).cwiseAbs().maxCoeff();
    const long n = std::max(1L, static_cast<long>(std::ceil(d / step)));
    for (long k = 0; k <= n; ++k) {
        const dtwin::JointConfig q = a + (b - a) * (static_cast<double>(k) / static_cast<double>(n));
        if (!oracle::state_valid(s, q)) return false;
    }
    return true;
}

/// Dijkstra over an undirected weighted graph; infinity when unreachable.
inline double shortest_path(std::size_t n, const std::vector<std::array<double, 3>>& edges, std::size_t src,
                            std::size_t dst) {
    std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
    for (const auto& e : edges) {
        const auto u = static_cast<std::size_t>(e[0]), v = static_cast<std::size_t>(e[1]);
        adj[u].push_back({v, e[2]});
        adj[v].push_back({u, e[2]});
    }
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[src] = 0;
    pq.push({0, src});
    while (!pq.empty()) {
        const auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        for (const auto& [v, w] : adj[u]) {
            if (d + w < dist[v]) {
                dist[v] = d + w;
                pq.push({dist[v], v});
            }
        }
    }
    return dist[dst];
}

}  // namespace oracle
