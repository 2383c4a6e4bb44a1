#include "dtwin/collision.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace dtwin {
namespace {

// Spheres are handled as a point core plus a radius; the other primitives are
// their own core with radius 0.
double core_radius(const Shape& s) {
    if (const auto* sp = std::get_if<Sphere>(&s)) return sp->radius;
    return 0.0;
}

Vec3 local_core_support(const Shape& s, const Vec3& d) {
    return std::visit(
        [&](const auto& v) -> Vec3 {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Box>) {
                return {d.x() >= 0 ? v.half_extents.x() : -v.half_extents.x(),
                        d.y() >= 0 ? v.half_extents.y() : -v.half_extents.y(),
                        d.z() >= 0 ? v.half_extents.z() : -v.half_extents.z()};
            } else if constexpr (std::is_same_v<T, Sphere>) {
                return Vec3::Zero();
            } else {
                const double r = std::hypot(d.x(), d.y());
                Vec3 out(0.0, 0.0, d.z() >= 0 ? v.half_height : -v.half_height);
                if (r > 0) {
                    out.x() = v.radius * d.x() / r;
                    out.y() = v.radius * d.y() / r;
                }
                return out;
            }
        },
        s);
}

Vec3 core_support(const Shape& s, const Pose& p, const Vec3& dir) {
    return p.apply(local_core_support(s, p.rotation.conjugate().rotate(dir)));
}

struct Simplex {
    std::array<Vec3, 4> pts;
    int size = 0;

    void set(std::initializer_list<Vec3> vs) {
        size = 0;
        for (const auto& v : vs) pts[size++] = v;
    }
};

// Closest point to the origin on triangle abc (Ericson, Real-Time Collision
// Detection, 5.1.5). Reduces `out` to the vertices spanning the feature.
Vec3 closest_on_triangle(const Vec3& a, const Vec3& b, const Vec3& c, Simplex& out) {
    const Vec3 ab = b - a, ac = c - a;
    const Vec3 ap = -a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) {
        out.set({a});
        return a;
    }
    const Vec3 bp = -b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) {
        out.set({b});
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double v = d1 / (d1 - d3);
        out.set({a, b});
        return a + v * ab;
    }
    const Vec3 cp = -c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) {
        out.set({c});
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double w = d2 / (d2 - d6);
        out.set({a, c});
        return a + w * ac;
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        out.set({b, c});
        return b + w * (c - b);
    }
    const double sum = va + vb + vc;
    if (!(std::abs(sum) > 0)) {
        // Degenerate (collinear) triangle: fall back to the closest edge.
        Simplex best;
        Vec3 best_v = a;
        double best_d = std::numeric_limits<double>::infinity();
        const std::array<std::pair<Vec3, Vec3>, 3> edges{{{a, b}, {a, c}, {b, c}}};
        for (const auto& [p, q] : edges) {
            const Vec3 pq = q - p;
            const double len2 = pq.squaredNorm();
            double t = len2 > 0 ? std::clamp(-p.dot(pq) / len2, 0.0, 1.0) : 0.0;
            const Vec3 x = p + t * pq;
            if (x.squaredNorm() < best_d) {
                best_d = x.squaredNorm();
                best_v = x;
                if (t <= 0) best.set({p});
                else if (t >= 1) best.set({q});
                else best.set({p, q});
            }
        }
        out = best;
        return best_v;
    }
    const double denom = 1.0 / sum;
    out.set({a, b, c});
    return a + ab * (vb * denom) + ac * (vc * denom);
}

// Origin on the opposite side of plane abc from d. Degenerate planes count as
// "outside" so the face is still examined.
bool origin_outside_plane(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
    const Vec3 n = (b - a).cross(c - a);
    const double sign_p = (-a).dot(n);
    const double sign_d = (d - a).dot(n);
    if (sign_d * sign_d < 1e-30) return true;
    return sign_p * sign_d < 0.0;
}

// Returns the closest point of conv(simplex) to the origin and reduces the
// simplex; `inside` is set when a full tetrahedron contains the origin.
Vec3 reduce_simplex(Simplex& s, bool& inside) {
    inside = false;
    switch (s.size) {
        case 1:
            return s.pts[0];
        case 2: {
            const Vec3 a = s.pts[0], b = s.pts[1];
            const Vec3 ab = b - a;
            const double len2 = ab.squaredNorm();
            const double t = len2 > 0 ? -a.dot(ab) / len2 : 0.0;
            if (t <= 0) {
                s.set({a});
                return a;
            }
            if (t >= 1) {
                s.set({b});
                return b;
            }
            return a + t * ab;
        }
        case 3: {
            Simplex out;
            const Vec3 v = closest_on_triangle(s.pts[0], s.pts[1], s.pts[2], out);
            s = out;
            return v;
        }
        default: {
            const Vec3 a = s.pts[0], b = s.pts[1], c = s.pts[2], d = s.pts[3];
            const std::array<std::array<Vec3, 4>, 4> faces{{{a, b, c, d}, {a, c, d, b}, {a, d, b, c}, {b, d, c, a}}};
            double best = std::numeric_limits<double>::infinity();
            Vec3 best_v = Vec3::Zero();
            Simplex best_s;
            bool any_outside = false;
            for (const auto& f : faces) {
                if (!origin_outside_plane(f[0], f[1], f[2], f[3])) continue;
                any_outside = true;
                Simplex out;
                const Vec3 v = closest_on_triangle(f[0], f[1], f[2], out);
                if (v.squaredNorm() < best) {
                    best = v.squaredNorm();
                    best_v = v;
                    best_s = out;
                }
            }
            if (!any_outside) {
                inside = true;
                return Vec3::Zero();
            }
            s = best_s;
            return best_v;
        }
    }
}

struct CoreResult {
    bool intersecting = false;
    bool converged = true;
    double distance = 0.0;
    int iterations = 0;
};

// GJK distance between the cores. Stops early once the distance lower bound
// exceeds `early_exit` (disabled when negative).
CoreResult gjk_cores(const Shape& sa, const Pose& pa, const Shape& sb, const Pose& pb, double early_exit) {
    CoreResult res;
    Vec3 v = pa.translation - pb.translation;
    if (v.squaredNorm() < 1e-24) v = Vec3::UnitX();
    v = core_support(sa, pa, v) - core_support(sb, pb, -v);
    Simplex simplex;
    simplex.set({v});

    for (int iter = 0; iter < kGjkMaxIterations; ++iter) {
        res.iterations = iter + 1;
        const double vv = v.squaredNorm();
        if (vv < 1e-24) {
            res.intersecting = true;
            return res;
        }
        const Vec3 w = core_support(sa, pa, -v) - core_support(sb, pb, v);
        const double vw = v.dot(w);
        const double vnorm = std::sqrt(vv);
        if (early_exit >= 0 && vw > early_exit * vnorm) {
            res.distance = vw / vnorm;
            return res;
        }
        if (vnorm - vw / vnorm <= kGjkTolerance) {
            res.distance = vnorm;
            return res;
        }
        bool duplicate = false;
        for (int i = 0; i < simplex.size; ++i) {
            if ((simplex.pts[i] - w).squaredNorm() < 1e-28) duplicate = true;
        }
        if (duplicate) {
            res.distance = vnorm;
            return res;
        }
        simplex.pts[simplex.size++] = w;
        bool inside = false;
        v = reduce_simplex(simplex, inside);
        if (inside) {
            res.intersecting = true;
            return res;
        }
        if (v.squaredNorm() >= vv) {
            // No progress: numerical floor reached.
            res.distance = vnorm;
            return res;
        }
    }
    res.intersecting = true;
    res.converged = false;
    return res;
}

double center_distance(const Pose& a, const Pose& b) { return (a.translation - b.translation).norm(); }

}  // namespace

Aabb posed_aabb(const Shape& s, const Pose& p) {
    const Eigen::Matrix3d r = p.rotation.matrix();
    const Vec3 ext = std::visit(
        [&](const auto& v) -> Vec3 {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Box>) {
                return r.cwiseAbs() * v.half_extents;
            } else if constexpr (std::is_same_v<T, Sphere>) {
                return Vec3::Constant(v.radius);
            } else {
                const Vec3 axis = r.col(2);
                Vec3 e;
                for (int i = 0; i < 3; ++i) {
                    e[i] = v.radius * std::sqrt(std::max(0.0, 1.0 - axis[i] * axis[i])) +
                           v.half_height * std::abs(axis[i]);
                }
                return e;
            }
        },
        s);
    return {p.translation - ext, p.translation + ext};
}

Vec3 support_point(const Shape& s, const Pose& p, const Vec3& dir) {
    Vec3 pt = core_support(s, p, dir);
    const double r = core_radius(s);
    if (r > 0 && dir.squaredNorm() > 0) pt += r * dir.normalized();
    return pt;
}

GjkResult gjk_distance(const Shape& sa, const Pose& pa, const Shape& sb, const Pose& pb, double early_exit) {
    const double radii = core_radius(sa) + core_radius(sb);
    const CoreResult c = gjk_cores(sa, pa, sb, pb, early_exit > 0 ? early_exit + radii : -1.0);
    GjkResult out;
    out.converged = c.converged;
    out.iterations = c.iterations;
    if (c.intersecting || c.distance <= radii) {
        out.intersecting = true;
        out.distance = 0.0;
    } else {
        out.distance = c.distance - radii;
    }
    return out;
}

bool shapes_collide(const Shape& sa, const Pose& pa, const Shape& sb, const Pose& pb, double margin) {
    const auto* sph_a = std::get_if<Sphere>(&sa);
    const auto* sph_b = std::get_if<Sphere>(&sb);
    if (sph_a && sph_b) return center_distance(pa, pb) < sph_a->radius + sph_b->radius + margin;

    if (center_distance(pa, pb) > bounding_radius(sa) + bounding_radius(sb) + margin) return false;
    const Aabb ba = posed_aabb(sa, pa), bb = posed_aabb(sb, pb);
    for (int i = 0; i < 3; ++i) {
        if (ba.min[i] - bb.max[i] > margin || bb.min[i] - ba.max[i] > margin) return false;
    }

    const double threshold = core_radius(sa) + core_radius(sb) + margin;
    const CoreResult c = gjk_cores(sa, pa, sb, pb, threshold);
    if (c.intersecting) return true;  // includes non-convergence
    return c.distance < threshold;
}

double shape_distance(const Shape& sa, const Pose& pa, const Shape& sb, const Pose& pb) {
    return gjk_distance(sa, pa, sb, pb).distance;
}

}  // namespace dtwin
