#include "dtwin/kinematics.hpp"

#include "generators.hpp"

#include <doctest.h>

using namespace dtwin;

namespace {

/// Central differences of the end pose: translation and rotation log.
Jacobian fd_jacobian(const RobotModel& m, const JointConfig& q, double h = 1e-6) {
    Jacobian jac(6, static_cast<Eigen::Index>(m.dof()));
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        JointConfig qp = q, qm = q;
        qp[i] += h;
        qm[i] -= h;
        const Pose a = end_effector_pose(m, qp), b = end_effector_pose(m, qm);
        jac.block<3, 1>(0, i) = (a.translation - b.translation) / (2 * h);
        jac.block<3, 1>(3, i) = (a.rotation * b.rotation.conjugate()).log() / (2 * h);
    }
    return jac;
}

JointConfig q2(double a, double b) { return (JointConfig(2) << a, b).finished(); }

}  // namespace

TEST_CASE("planar two-link forward kinematics") {
    const RobotModel arm = gen::planar_arm(2);
    CHECK((end_effector_pose(arm, q2(0, 0)).translation - Vec3(2, 0, 0)).norm() < 1e-12);
    CHECK((end_effector_pose(arm, q2(M_PI / 2, 0)).translation - Vec3(0, 2, 0)).norm() < 1e-12);
    CHECK((end_effector_pose(arm, q2(M_PI / 2, -M_PI / 2)).translation - Vec3(1, 1, 0)).norm() < 1e-12);
    const auto frames = forward_kinematics(arm, q2(M_PI / 2, 0));
    REQUIRE(frames.size() == 2);
    CHECK((frames[0].translation - Vec3(0, 1, 0)).norm() < 1e-12);
    CHECK_THROWS_AS(forward_kinematics(arm, JointConfig::Zero(3)), DimensionMismatch);
}

TEST_CASE("jacobian examples") {
    const RobotModel arm = gen::planar_arm(2);
    const Jacobian j = jacobian(arm, q2(0, 0));
    CHECK((j.block<3, 1>(0, 0) - Vec3(0, 2, 0)).norm() < 1e-12);
    CHECK((j.block<3, 1>(0, 1) - Vec3(0, 1, 0)).norm() < 1e-12);

    Joint slide;
    slide.kind = JointKind::prismatic;
    slide.axis = Vec3::UnitZ();
    slide.lower = -1;
    slide.upper = 1;
    const RobotModel lift(Pose::identity(), {slide}, {Sphere{0.1}});
    for (double q : {-0.7, 0.0, 0.4}) {
        Eigen::Matrix<double, 6, 1> expect;
        expect << 0, 0, 1, 0, 0, 0;
        CHECK((jacobian(lift, JointConfig::Constant(1, q)).col(0) - expect).norm() < 1e-15);
    }
}

TEST_CASE("jacobian matches finite differences") {
    CounterRng r(11);
    for (int s = 0; s < 100; ++s) {
        const RobotModel m = gen::random_arm(r, 1 + s % 7);
        const JointConfig q = gen::random_q(r, m);
        const Jacobian diff = jacobian(m, q) - fd_jacobian(m, q);
        REQUIRE(diff.cwiseAbs().maxCoeff() < 1e-5);
    }
}

TEST_CASE("forward kinematics is Lipschitz in each joint") {
    CounterRng r(12);
    const RobotModel m = *gen::load_scene(DTWIN_SCENES "/demo_cell.sdl").robot;
    const double eps = 1e-6;
    for (int s = 0; s < 200; ++s) {
        const JointConfig q = gen::random_q(r, m);
        const auto base = forward_kinematics(m, q);
        for (Eigen::Index i = 0; i < q.size(); ++i) {
            JointConfig qe = q;
            qe[i] += eps;
            const auto moved = forward_kinematics(m, qe);
            for (std::size_t k = 0; k < base.size(); ++k)
                REQUIRE((moved[k].translation - base[k].translation).norm() <= m.total_length() * eps * (1 + 1e-6));
        }
    }
}

TEST_CASE("inverse kinematics examples") {
    const RobotModel arm = gen::planar_arm(2);
    const JointConfig home =
        solve_ik(arm, Pose::from_translation({2, 0, 0}), q2(0.1, -0.1), {.position_tolerance = 1e-7, .position_only = true});
    CHECK(ik_residual(arm, home, Pose::from_translation({2, 0, 0})).position < 1e-6);

    CHECK_THROWS_AS(solve_ik(arm, Pose::from_translation({3, 0, 0}), q2(0.1, -0.1), {.position_only = true}),
                    Unreachable);
    try {
        solve_ik(arm, Pose::from_translation({3, 0, 0}), q2(0.1, -0.1), {.position_only = true});
    } catch (const Unreachable& u) {
        CHECK(u.position_residual == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(arm.within_limits(u.best));
    }

    const Pose target = Pose::from_translation({1.2, 0.8, 0});
    IkOptions tight{.position_tolerance = 1e-7, .position_only = true};
    const JointConfig q = solve_ik(arm, target, q2(0.3, 0.3), tight);
    CHECK(ik_residual(arm, q, target).position < 1e-6);
}

TEST_CASE("ik success implies a small residual and respects limits") {
    CounterRng r(13);
    const RobotModel m = *gen::load_scene(DTWIN_SCENES "/demo_cell.sdl").robot;
    int successes = 0;
    for (int s = 0; s < 100; ++s) {
        const JointConfig truth = gen::random_q(r, m);
        const Pose target = end_effector_pose(m, truth);
        const JointConfig seed = m.clamp(truth + gen::random_q(r, m) * 0.3);
        for (bool pos_only : {false, true}) {
            try {
                const JointConfig q = solve_ik(m, target, seed, {.position_only = pos_only});
                const IkResidual res = ik_residual(m, q, target);
                REQUIRE(res.position < 1e-4);
                if (!pos_only) REQUIRE(res.rotation < 1e-3);
                REQUIRE(m.within_limits(q));
                ++successes;
            } catch (const Unreachable& u) {
                REQUIRE(m.within_limits(u.best));
            }
        }
    }
    CHECK(successes > 100);
}
