#pragma once

// Seeded random inputs for property tests.

#include "dtwin/planning_scene.hpp"
#include "dtwin/rng.hpp"
#include "dtwin/sdl.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace gen {

using dtwin::CounterRng;
using dtwin::Vec3;

inline Vec3 vec(CounterRng& r, double lo, double hi) { return {r.uniform(lo, hi), r.uniform(lo, hi), r.uniform(lo, hi)}; }

inline dtwin::UnitQuat rotation(CounterRng& r) {
    // Uniform on SO(3) from three uniforms.
    const double u1 = r.uniform(), u2 = r.uniform() * 2 * M_PI, u3 = r.uniform() * 2 * M_PI;
    const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
    return dtwin::UnitQuat(a * std::sin(u2), a * std::cos(u2), b * std::sin(u3), b * std::cos(u3));
}

inline dtwin::Pose pose(CounterRng& r, double spread) { return {vec(r, -spread, spread), rotation(r)}; }

inline dtwin::Shape shape(CounterRng& r, double lo = 0.05, double hi = 0.5) {
    switch (r.next_u64() % 3) {
        case 0: return dtwin::Box{vec(r, lo, hi)};
        case 1: return dtwin::Sphere{r.uniform(lo, hi)};
        default: return dtwin::Cylinder{r.uniform(lo, hi), r.uniform(lo, hi)};
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline dtwin::PlanningScene load_scene(const std::string& path) {
    const auto r = dtwin::sdl::parse(read_file(path));
    if (!r.ok()) throw std::runtime_error("cannot load " + path);
    return dtwin::from_scene_model(dtwin::sdl::to_scene_model(*r.document));
}

/// Planar chain of revolute z joints, each link `len` long along x.
inline dtwin::RobotModel planar_arm(std::size_t n, double len = 1.0, double limit = M_PI, double link_radius = 0.05) {
    std::vector<dtwin::Joint> joints;
    std::vector<dtwin::Shape> shapes;
    for (std::size_t i = 0; i < n; ++i) {
        dtwin::Joint j;
        j.name = "j" + std::to_string(i + 1);
        j.axis = Vec3::UnitZ();
        j.origin = dtwin::Pose::from_translation({len, 0, 0});
        j.lower = -limit;
        j.upper = limit;
        j.vel_limit = 1.0;
        j.acc_limit = 2.0;
        joints.push_back(j);
        shapes.push_back(dtwin::Box{Vec3(len / 2, link_radius, link_radius)});
    }
    return dtwin::RobotModel(dtwin::Pose::identity(), joints, shapes);
}

/// Random serial chain mixing revolute and prismatic joints with random axes.
inline dtwin::RobotModel random_arm(CounterRng& r, std::size_t n) {
    std::vector<dtwin::Joint> joints;
    std::vector<dtwin::Shape> shapes;
    for (std::size_t i = 0; i < n; ++i) {
        dtwin::Joint j;
        j.name = "j" + std::to_string(i + 1);
        j.kind = r.uniform() < 0.2 ? dtwin::JointKind::prismatic : dtwin::JointKind::revolute;
        j.axis = vec(r, -1, 1).normalized();
        j.origin = {vec(r, -0.3, 0.3), rotation(r)};
        if (j.kind == dtwin::JointKind::prismatic) {
            j.lower = -0.2;
            j.upper = 0.2;
        } else {
            j.lower = -3.0;
            j.upper = 3.0;
        }
        joints.push_back(j);
        shapes.push_back(dtwin::Sphere{0.02});
    }
    return dtwin::RobotModel({vec(r, -0.5, 0.5), rotation(r)}, joints, shapes);
}

inline dtwin::JointConfig random_q(CounterRng& r, const dtwin::RobotModel& m) {
    dtwin::JointConfig q(static_cast<Eigen::Index>(m.dof()));
    for (std::size_t j = 0; j < m.dof(); ++j) q[static_cast<Eigen::Index>(j)] = r.uniform(m.joints()[j].lower, m.joints()[j].upper);
    return q;
}

/// Scene around an arbitrary robot, link ids l1..ln, adjacent pairs allowed.
inline dtwin::PlanningScene scene_for(const dtwin::RobotModel& m) {
    dtwin::SceneModel sm;
    sm.robot_id = "robot";
    sm.robot = m;
    for (std::size_t i = 0; i < m.dof(); ++i) sm.link_ids.push_back("l" + std::to_string(i + 1));
    return dtwin::from_scene_model(sm);
}

inline dtwin::PlanningScene with_obstacle(dtwin::PlanningScene s, const std::string& id, const dtwin::Shape& sh,
                                          const dtwin::Pose& p) {
    return dtwin::apply_diff(s, {{dtwin::diff::AddObject{{id, sh, p, {}}}}});
}

/// Random valid SDL document built from the grammar.
inline dtwin::sdl::SdlDocument sdl_document(CounterRng& r) {
    using namespace dtwin::sdl;
    auto num = [&](double lo, double hi) {
        // Mix round numbers with full-precision ones.
        const double v = r.uniform(lo, hi);
        return r.uniform() < 0.5 ? std::round(v * 100) / 100 : v;
    };
    auto triple = [&](double lo, double hi) { return Triple{num(lo, hi), num(lo, hi), num(lo, hi)}; };
    auto pose = [&] { return PoseDecl{triple(-2, 2), triple(-180, 180)}; };
    auto shape = [&]() -> ShapeDecl {
        switch (r.next_u64() % 3) {
            case 0: return BoxDecl{{num(0.01, 1), num(0.01, 1), num(0.01, 1)}};
            case 1: return SphereDecl{num(0.01, 1)};
            default: return CylinderDecl{num(0.01, 1), num(0.01, 1)};
        }
    };
    int counter = 0;
    auto ident = [&](const char* stem) { return std::string(stem) + "_" + std::to_string(++counter); };
    auto signal = [&] {
        SignalDecl s;
        s.name = ident("sig");
        s.kind = r.uniform() < 0.5 ? dtwin::SignalKind::digital : dtwin::SignalKind::analog;
        s.rate_hz = num(0.5, 500);
        s.protocol = static_cast<dtwin::Protocol>(r.next_u64() % 4);
        return s;
    };

    SdlDocument doc;
    doc.version = 1;
    const int machines = static_cast<int>(r.next_u64() % 4);
    const int zones = static_cast<int>(r.next_u64() % 3);
    std::vector<Declaration> decls;
    for (int i = 0; i < machines; ++i) {
        MachineDecl m;
        m.id = ident("machine");
        m.pose = pose();
        m.shape = shape();
        if (r.uniform() < 0.5) m.mesh_ref = "models/part " + std::to_string(i) + "\\\".stl";
        if (r.uniform() < 0.5) {
            ControllerDecl c;
            c.id = ident("plc");
            for (auto k = r.next_u64() % 3; k > 0; --k) c.signals.push_back(signal());
            m.controller = c;
        }
        for (auto k = r.next_u64() % 3; k > 0; --k) m.signals.push_back(signal());
        decls.push_back(m);
    }
    RobotDecl rb;
    rb.id = ident("arm");
    rb.base_pose = pose();
    for (std::size_t j = 1 + r.next_u64() % 6; j > 0; --j) {
        JointDecl jd;
        jd.id = ident("joint");
        jd.kind = r.uniform() < 0.8 ? dtwin::JointKind::revolute : dtwin::JointKind::prismatic;
        Vec3 axis = vec(r, -1, 1);
        if (r.uniform() < 0.5) axis = Vec3::Unit(static_cast<Eigen::Index>(r.next_u64() % 3));
        jd.axis = {axis.x(), axis.y(), axis.z()};
        jd.origin = pose();
        jd.lower = num(-170, -1);
        jd.upper = num(1, 170);
        jd.vel = num(0.1, 3);
        jd.acc = num(0.1, 5);
        rb.joints.push_back(jd);
        rb.links.push_back({shape()});
    }
    decls.push_back(rb);
    for (int i = 0; i < zones; ++i) {
        ZoneDecl z;
        z.id = ident("zone");
        z.role = static_cast<dtwin::ZoneRole>(r.next_u64() % 3);
        z.pose = pose();
        z.shape = shape();
        decls.push_back(z);
    }
    // Shuffle declaration order.
    for (std::size_t i = decls.size(); i > 1; --i) std::swap(decls[i - 1], decls[r.next_u64() % i]);
    doc.declarations = decls;
    return doc;
}

}  // namespace gen
