// Acceptance suite: one PASS/FAIL line per criterion.

#include "dtwin/engine.hpp"

#include "generators.hpp"
#include "oracles.hpp"

#include <httplib.h>

#include <chrono>
#include <csignal>
#include <filesystem>
#include <functional>
#include <iostream>
#include <regex>
#include <thread>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

using namespace dtwin;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 3) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

// ---- processes ----

struct Child {
    pid_t pid = -1;
    std::string out_path;

    Child() = default;
    Child(const Child&) = delete;
    Child& operator=(const Child&) = delete;
    Child(Child&& o) noexcept : pid(std::exchange(o.pid, -1)), out_path(std::move(o.out_path)) {}
    Child& operator=(Child&& o) noexcept {
        kill(SIGKILL);
        pid = std::exchange(o.pid, -1);
        out_path = std::move(o.out_path);
        return *this;
    }
    ~Child() { kill(SIGKILL); }

    static Child spawn(const std::vector<std::string>& argv, const std::string& out, const std::string& err = {}) {
        Child c;
        c.out_path = out;
        c.pid = ::fork();
        if (c.pid < 0) throw std::runtime_error("fork failed");
        if (c.pid == 0) {
            const int fd = ::open(out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
            const int efd = err.empty() ? fd : ::open(err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
            ::dup2(fd, 1);
            ::dup2(efd, 2);
            std::vector<char*> args;
            for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
            args.push_back(nullptr);
            ::execv(args[0], args.data());
            ::_exit(127);
        }
        return c;
    }

    void kill(int sig) {
        if (pid <= 0) return;
        ::kill(pid, sig);
        ::waitpid(pid, nullptr, 0);
        pid = -1;
    }

    int wait() {
        int status = 0;
        ::waitpid(pid, &status, 0);
        pid = -1;
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
};

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("dtwin_accept_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

const TempDir& tmp() {
    static const TempDir d;
    return d;
}

struct Twin {
    Child proc;
    std::uint16_t http = 0, robot = 0;
    bool recovered = false;
};

Twin start_twin(const std::string& sdl, const std::string& log, const std::string& tag) {
    Twin t;
    t.proc = Child::spawn({DTWIN_TWIN_BIN, "serve", "--sdl", sdl, "--http-port", "0", "--robot-port", "0", "--log", log},
                          tmp().file(tag + ".out"));
    static const std::regex ready(R"(twin: ready http=[^:]+:(\d+) robot=[^:]+:(\d+)( recovered)?)");
    const auto t0 = Clock::now();
    while (since(t0) < 10) {
        const std::string out = gen::read_file(t.proc.out_path);
        std::smatch m;
        if (std::regex_search(out, m, ready)) {
            t.http = static_cast<std::uint16_t>(std::stoi(m[1]));
            t.robot = static_cast<std::uint16_t>(std::stoi(m[2]));
            t.recovered = m[3].matched;
            return t;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    throw std::runtime_error("twin did not report ready");
}

Child start_sim(std::uint16_t port, double time_scale, const std::string& tag) {
    return Child::spawn({DTWIN_SIM_BIN, "--twin-address", "127.0.0.1:" + std::to_string(port), "--dof", "6",
                         "--time-scale", fmt(time_scale, 6)},
                        tmp().file(tag + ".out"));
}

struct Api {
    httplib::Client cli;
    explicit Api(std::uint16_t port) : cli("127.0.0.1", port) { cli.set_read_timeout(10, 0); }

    Json get(const std::string& path) {
        auto r = cli.Get(path);
        if (!r) throw std::runtime_error("GET " + path + " failed");
        return parse_json(r->body);
    }
    Json post(const std::string& path, const Json& body, int expect) {
        auto r = cli.Post(path, canonical(body), "application/json");
        if (!r) throw std::runtime_error("POST " + path + " failed");
        if (r->status != expect)
            throw std::runtime_error("POST " + path + " -> " + std::to_string(r->status) + " " + r->body);
        return parse_json(r->body);
    }
    Json state() { return get("/api/state"); }
};

bool wait_for(const std::function<bool()>& pred, double seconds) {
    const auto t0 = Clock::now();
    while (since(t0) < seconds) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return pred();
}

Json await_proposal(Api& api, const std::string& not_id, double seconds = 20) {
    Json st;
    const bool ok = wait_for(
        [&] {
            st = api.state();
            return st.at("state") == "awaiting_approval" && st.value("proposal_id", "") != not_id;
        },
        seconds);
    if (!ok) throw std::runtime_error("no proposal; state " + canonical(st));
    return api.get("/api/proposals/" + st.at("proposal_id").get<std::string>());
}

void await_idle(Api& api, double seconds) {
    if (!wait_for([&] { return api.state().at("state") == "idle"; }, seconds))
        throw std::runtime_error("not idle; state " + canonical(api.state()));
}

std::vector<Json> events(Api& api) {
    std::vector<Json> out;
    std::uint64_t after = 0;
    for (;;) {
        const Json page = api.get("/api/events?since=" + std::to_string(after));
        for (const auto& e : page.at("events")) out.push_back(e);
        if (page.at("events").empty()) return out;
        after = page.at("last_seq");
    }
}

Json goal_body(const Goal& g, const std::string& planner = "rrt_star") {
    return {{"goal", to_json(g)}, {"planner", planner}};
}

const std::string kDemo = DTWIN_SCENES "/demo_cell.sdl";
const std::string kWall = DTWIN_SCENES "/wall_cell.sdl";

JointConfig demo_goal() { return (JointConfig(6) << 1.2, 0.6, -0.4, 0.3, 0.5, 0).finished(); }
JointConfig wall_goal() { return (JointConfig(6) << 2, 1, 1, 0, 0.6, 0).finished(); }

bool trajectory_valid(const PlanningScene& s, const Trajectory& t, double step) {
    for (std::size_t i = 0; i + 1 < t.points.size(); ++i)
        if (!oracle::motion_valid(s, t.points[i].q, t.points[i + 1].q, step)) return false;
    return true;
}

// ---- criteria ----

JointConfig sample_valid(CounterRng& r, const CollisionChecker& cc) {
    for (int k = 0; k < 500; ++k) {
        const JointConfig q = gen::random_q(r, *cc.scene().robot);
        if (cc.state_valid(q)) return q;
    }
    throw std::runtime_error("no valid configuration found");
}

PlanningScene cluttered(CounterRng& r, const PlanningScene& base) {
    SceneDiff d;
    const int extra = static_cast<int>(r.next_u64() % 3);
    for (int k = 0; k < extra; ++k) {
        const double a = r.uniform(-M_PI, M_PI), rad = r.uniform(0.45, 0.9);
        const Vec3 at(rad * std::cos(a), rad * std::sin(a), r.uniform(0.4, 1.3));
        d.ops.push_back(diff::AddObject{{"clutter_" + std::to_string(k), Box{gen::vec(r, 0.05, 0.25)},
                                         Pose{at, gen::rotation(r)}, {}}});
    }
    return apply_diff(base, d);
}

Outcome planner_soundness() {
    const auto t0 = Clock::now();
    const PlanningScene demo = gen::load_scene(kDemo), wall = gen::load_scene(kWall);
    int paths = 0, violations = 0, instances = 0;
    for (const PlannerKind kind : {PlannerKind::rrt, PlannerKind::rrt_star, PlannerKind::prm}) {
        CounterRng r(1000 + static_cast<std::uint64_t>(kind));
        for (int i = 0; i < 200; ++i) {
            const PlanningScene s = cluttered(r, i % 2 ? wall : demo);
            const CollisionChecker cc(s);
            PlanRequest req;
            req.scene_revision = s.revision;
            req.start = sample_valid(r, cc);
            req.goal = JointGoal{sample_valid(r, cc)};
            req.planner = kind;
            req.seed = r.next_u64();
            req.time_budget = 0.5;
            ++instances;
            try {
                const Path p = plan(s, req);
                ++paths;
                const double fine = req.params.motion_step / 10;
                bool ok = p.waypoints.front() == req.start &&
                          p.waypoints.back() == std::get<JointGoal>(req.goal).q;
                for (std::size_t k = 0; ok && k + 1 < p.waypoints.size(); ++k)
                    ok = oracle::motion_valid(s, p.waypoints[k], p.waypoints[k + 1], fine);
                if (!ok) ++violations;
            } catch (const PlanError&) {
            }
        }
    }
    const double secs = since(t0);
    return {violations == 0 && secs < 60 && paths > 0,
            std::to_string(instances) + " instances, " + std::to_string(paths) + " paths, " +
                std::to_string(violations) + " violations, " + fmt(secs) + " s"};
}

Outcome determinism() {
    const std::string planners[] = {"rrt", "rrt_star", "prm"};
    int identical = 0, failed = 0;
    for (int i = 0; i < 20; ++i) {
        const bool wall = i % 2;
        const std::string goal = canonical(to_json(Goal{JointGoal{wall ? wall_goal() : demo_goal()}}));
        const std::vector<std::string> argv{DTWIN_TWIN_BIN, "plan",      "--sdl",  wall ? kWall : kDemo,
                                            "--goal",       goal,        "--planner", planners[i % 3],
                                            "--seed",       std::to_string(7 * i + 1)};
        std::string outs[2];
        bool ran = true;
        for (int k = 0; k < 2; ++k) {
            const std::string path = tmp().file("plan_" + std::to_string(k) + ".json");
            Child c = Child::spawn(argv, path, tmp().file("plan.err"));
            ran = c.wait() == 0 && ran;
            outs[k] = gen::read_file(path);
        }
        if (!ran || outs[0].empty()) ++failed;
        else if (outs[0] == outs[1]) ++identical;
    }
    return {identical == 20, std::to_string(identical) + "/20 byte-identical, " + std::to_string(failed) + " failed"};
}

Outcome collision_oracle() {
    CounterRng r(2000);
    int checked = 0, mismatches = 0, box_checked = 0, sat_mismatches = 0;
    auto box_pair = [&](const Box& a, const Pose& pa, const Box& b, const Pose& pb) {
        const auto o = oracle::overlap_depth(a, pa, b, pb, 0, 1e-3);
        if (o.lower > -1e-3 && o.upper < 1e-3) return;
        ++box_checked;
        if (shapes_collide(a, pa, b, pb, 0) != oracle::sat_boxes_intersect(a, pa, b, pb)) ++sat_mismatches;
    };
    for (int i = 0; i < 10000; ++i) {
        const Shape sa = gen::shape(r), sb = gen::shape(r);
        const Pose pa = gen::pose(r, 0.6), pb = gen::pose(r, 0.6);
        const double m = r.uniform() < 0.5 ? 0.0 : 0.005;
        // The depth is half the separation, so the 2e-3 touching band is +-1e-3 here.
        const auto o = oracle::overlap_depth(sa, pa, sb, pb, m, 1e-3);
        if (!(o.lower > -1e-3 && o.upper < 1e-3)) {
            ++checked;
            if (shapes_collide(sa, pa, sb, pb, m) != (o.upper < 0)) ++mismatches;
        }
        if (std::holds_alternative<Box>(sa) && std::holds_alternative<Box>(sb))
            box_pair(std::get<Box>(sa), pa, std::get<Box>(sb), pb);
    }
    for (int i = 0; i < 2000; ++i)
        box_pair(Box{gen::vec(r, 0.05, 0.5)}, gen::pose(r, 0.6), Box{gen::vec(r, 0.05, 0.5)}, gen::pose(r, 0.6));
    return {mismatches == 0 && sat_mismatches == 0 && checked >= 9000,
            std::to_string(mismatches) + " mismatches in " + std::to_string(checked) + " pairs outside the band, " +
                std::to_string(sat_mismatches) + " SAT mismatches in " + std::to_string(box_checked) + " box pairs"};
}

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

Outcome kinematics() {
    CounterRng r(3000);
    double jac_err = 0;
    for (int s = 0; s < 100; ++s) {
        const RobotModel m = gen::random_arm(r, 1 + s % 7);
        const JointConfig q = gen::random_q(r, m);
        jac_err = std::max(jac_err, (jacobian(m, q) - fd_jacobian(m, q)).cwiseAbs().maxCoeff());
    }

    const RobotModel arm = gen::planar_arm(2);
    auto q2 = [](double a, double b) { return (JointConfig(2) << a, b).finished(); };
    const double fk_err = std::max({(end_effector_pose(arm, q2(0, 0)).translation - Vec3(2, 0, 0)).norm(),
                                    (end_effector_pose(arm, q2(M_PI / 2, 0)).translation - Vec3(0, 2, 0)).norm(),
                                    (end_effector_pose(arm, q2(M_PI / 2, -M_PI / 2)).translation - Vec3(1, 1, 0)).norm()});

    const RobotModel demo = *gen::load_scene(kDemo).robot;
    int successes = 0, bad = 0;
    for (int s = 0; s < 200; ++s) {
        const JointConfig truth = gen::random_q(r, demo);
        const Pose target = end_effector_pose(demo, truth);
        const JointConfig seed = demo.clamp(truth + gen::random_q(r, demo) * 0.3);
        const bool pos_only = s % 2;
        try {
            const JointConfig q = solve_ik(demo, target, seed, {.position_only = pos_only});
            const IkResidual res = ik_residual(demo, q, target);
            ++successes;
            if (res.position >= 1e-4 || (!pos_only && res.rotation >= 1e-3) || !demo.within_limits(q)) ++bad;
        } catch (const Unreachable&) {
        }
    }
    return {jac_err < 1e-5 && fk_err < 1e-12 && bad == 0 && successes > 0,
            "jacobian max error " + fmt(jac_err) + ", FK examples max error " + fmt(fk_err) + ", " +
                std::to_string(bad) + " bad residuals in " + std::to_string(successes) + " IK successes"};
}

Outcome trajectory_limits() {
    const PlanningScene demo = gen::load_scene(kDemo);
    const RobotModel& m = *demo.robot;
    CounterRng r(4000);
    double vel = 0, acc = 0;
    bool boundary = true;
    for (int i = 0; i < 100; ++i) {
        Path p;
        const int n = 2 + static_cast<int>(r.next_u64() % 5);
        for (int k = 0; k < n; ++k) p.waypoints.push_back(gen::random_q(r, m) * r.uniform(0.05, 1));
        const Trajectory tr = time_parameterize(interpolate(p, 0.2), m);
        const auto& pts = tr.points;
        boundary = boundary && pts.front().qdot == JointConfig::Zero(6) && pts.back().qdot == JointConfig::Zero(6);
        for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
            const double dt = pts[k + 1].t - pts[k].t;
            for (std::size_t j = 0; j < 6; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                vel = std::max(vel, std::abs(pts[k + 1].q[jj] - pts[k].q[jj]) / dt - m.joints()[j].vel_limit);
            }
        }
        for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
            const double h0 = pts[k].t - pts[k - 1].t, h1 = pts[k + 1].t - pts[k].t;
            for (std::size_t j = 0; j < 6; ++j) {
                const auto jj = static_cast<Eigen::Index>(j);
                const double v0 = (pts[k].q[jj] - pts[k - 1].q[jj]) / h0;
                const double v1 = (pts[k + 1].q[jj] - pts[k].q[jj]) / h1;
                acc = std::max(acc, std::abs(2 * (v1 - v0) / (h0 + h1)) / m.joints()[j].acc_limit);
            }
        }
    }

    auto single = [](double v, double a) {
        Joint j;
        j.axis = Vec3::UnitZ();
        j.lower = -3;
        j.upper = 3;
        j.vel_limit = v;
        j.acc_limit = a;
        return RobotModel(Pose::identity(), {j}, {Sphere{0.05}});
    };
    const Path unit{{JointConfig::Constant(1, 0), JointConfig::Constant(1, 1)}};
    const double trap = time_parameterize(unit, single(1, 4)).total_duration;
    const double tri = time_parameterize(unit, single(10, 1)).total_duration;
    const bool closed = std::abs(trap - 1.25) < 1e-9 && std::abs(tri - 2.0) < 1e-9;
    return {vel <= 1e-6 && acc <= 1.05 && boundary && closed,
            "max velocity excess " + fmt(vel) + " rad/s, max acc ratio " + fmt(acc, 4) + ", boundary " +
                (boundary ? "zero" : "nonzero") + ", durations " + fmt(trap, 12) + " s / " + fmt(tri, 12) + " s"};
}

/// Where machine_3 must go to block `traj` while leaving `home` free and the
/// goal plannable.
std::optional<Pose> blocking_pose(const PlanningScene& s, const Trajectory& traj, const JointConfig& home,
                                  const Goal& goal) {
    const auto& pts = traj.points;
    // Middle of the motion first, then outward.
    std::vector<std::size_t> order;
    for (std::size_t d = 0; d <= pts.size() / 4; ++d) {
        order.push_back(pts.size() / 2 + d);
        if (d) order.push_back(pts.size() / 2 - d);
    }
    int plans = 0;
    for (const double offset : {0.3, 0.2, 0.1, 0.0}) {
        for (const std::size_t k : order) {
            if (k >= pts.size()) continue;
            const ChainPoses cp = chain_poses(*s.robot, pts[k].q);
            for (std::size_t link = 2; link < cp.shape_poses.size(); ++link) {
                Vec3 at = cp.shape_poses[link].translation;
                Vec3 out(at.x(), at.y(), 0);
                if (out.norm() > 1e-6) at += offset * out.normalized();
                const Pose pose = Pose::from_translation(at);
                const PlanningScene moved = apply_diff(s, SceneDiff{{diff::MoveObject{"machine_3", pose}}});
                const CollisionChecker cc(moved);
                if (!cc.state_valid(home)) continue;
                bool blocked = false;
                for (std::size_t i = 0; !blocked && i + 1 < pts.size(); ++i)
                    blocked = !cc.motion_valid(pts[i].q, pts[i + 1].q, PlanParams{}.motion_step);
                if (!blocked) continue;
                if (++plans > 8) return std::nullopt;
                PlanRequest req;
                req.scene_revision = moved.revision;
                req.start = home;
                req.goal = goal;
                req.seed = 1;
                try {
                    (void)plan(moved, req);
                    return pose;
                } catch (const PlanError&) {
                }
            }
        }
    }
    return std::nullopt;
}

Outcome reconfiguration() {
    const auto t0 = Clock::now();
    Twin twin = start_twin(kDemo, tmp().file("reconfig.jsonl"), "reconfig_twin");
    Child sim = start_sim(twin.robot, 50, "reconfig_sim");
    Api api(twin.http);
    if (!wait_for([&] { return api.get("/api/robot").at("state") == "connected"; }, 10))
        return {false, "robot_sim did not connect"};

    const PlanningScene initial = scene_from_json(api.get("/api/scene"));
    const JointConfig home = initial.current_q;
    Pose place = initial.obstacles.at("target_placement").pose;
    place.translation.z() += 0.15;
    const Goal goal = PoseGoal{place, true};

    auto execute = [&](const Goal& g, const std::string& prev) {
        api.post("/api/goals", goal_body(g), 202);
        const Json p = await_proposal(api, prev);
        const std::string id = p.at("id");
        api.post("/api/proposals/" + id + "/decision", {{"approve", true}}, 200);
        await_idle(api, 20);
        const std::string status = api.get("/api/proposals/" + id).at("status");
        if (status != "executed") throw std::runtime_error(id + " ended " + status);
        return p;
    };

    const Json first = execute(goal, "");
    const Trajectory t1 = trajectory_from_json(first.at("trajectory"));
    const JointConfig reached = config_from_json(api.get("/api/scene").at("current_q"));
    if ((reached - t1.points.back().q).cwiseAbs().maxCoeff() > 1e-6) return {false, "robot did not reach the goal"};
    const Json back = execute(JointGoal{home}, first.at("id"));

    const PlanningScene before = scene_from_json(api.get("/api/scene"));
    const auto across = blocking_pose(before, t1, home, goal);
    if (!across) return {false, "no blocking placement found for machine_3"};
    api.post("/api/scene/diff", to_json(SceneDiff{{diff::MoveObject{"machine_3", *across}}}), 200);
    const PlanningScene after = scene_from_json(api.get("/api/scene"));
    const bool old_blocked = !trajectory_valid(after, t1, PlanParams{}.motion_step / 10);

    const Json second = execute(goal, back.at("id"));
    const Trajectory t2 = trajectory_from_json(second.at("trajectory"));
    const bool valid = trajectory_valid(after, t2, PlanParams{}.motion_step / 10);
    const bool differs = canonical(to_json(t1)) != canonical(to_json(t2));
    const double secs = since(t0);
    sim.kill(SIGTERM);
    twin.proc.kill(SIGTERM);
    return {old_blocked && valid && differs && secs < 30,
            std::string("first path ") + (old_blocked ? "blocked" : "still clear") + " after the move, new trajectory " +
                (valid ? "valid" : "INVALID") + (differs ? " and different" : " and identical") + ", " + fmt(secs) +
                " s"};
}

Outcome reject_replan() {
    Twin twin = start_twin(kWall, tmp().file("wall.jsonl"), "wall_twin");
    Api api(twin.http);
    const std::string gid = api.post("/api/goals", goal_body(JointGoal{wall_goal()}), 202).at("goal_id");
    std::vector<Json> props;
    std::string prev;
    for (int attempt = 1; attempt <= 3; ++attempt) {
        const Json p = await_proposal(api, prev);
        props.push_back(p);
        prev = p.at("id");
        api.post("/api/proposals/" + prev + "/decision", {{"approve", false}}, 200);
    }
    await_idle(api, 10);
    bool failed = false;
    for (const auto& e : events(api))
        if (e.at("kind") == "goal_failed" && e.at("payload").at("goal_id") == gid) failed = true;
    const bool second = props[1].at("attempt") == 2 &&
                        props[1].at("request").at("seed") != props[0].at("request").at("seed") &&
                        props[1].at("path") != props[0].at("path");
    bool all_rejected = true;
    for (const auto& p : props)
        all_rejected = all_rejected && api.get("/api/proposals/" + p.at("id").get<std::string>()).at("status") == "rejected";
    twin.proc.kill(SIGTERM);
    return {second && failed && all_rejected,
            std::string("attempt 2 ") + (second ? "has a new seed and path" : "REPEATS attempt 1") + ", goal " +
                (failed ? "failed to idle" : "did not fail") + " after 3 rejections"};
}

Outcome crash_recovery() {
    const std::string log = tmp().file("crash.jsonl");
    Twin a = start_twin(kDemo, log, "crash_a");
    Api api(a.http);
    api.post("/api/scene/diff", parse_json(R"({"ops":[{"op":"move_object","id":"pick_zone","pose":)"
                                           R"({"translation":[0.5,0.02,0.65],"rotation":[1,0,0,0]}}]})"),
             200);
    api.post("/api/goals", goal_body(JointGoal{demo_goal()}), 202);
    const Json p = await_proposal(api, "");
    const Json state = api.state();
    const Json scene = api.get("/api/scene");
    a.proc.kill(SIGKILL);

    Twin b = start_twin(kDemo, log, "crash_b");
    Api again(b.http);
    const Json state2 = again.state();
    const Json scene2 = again.get("/api/scene");
    const Json p2 = again.get("/api/proposals/" + p.at("id").get<std::string>());
    b.proc.kill(SIGTERM);
    const bool same_state = canonical(state) == canonical(state2);
    const bool same_rev = scene.at("revision") == scene2.at("revision");
    return {b.recovered && same_state && same_rev && canonical(p) == canonical(p2),
            "state " + canonical(state2) + (same_state ? " matches" : " DIFFERS") + ", revision " +
                canonical(scene2.at("revision")) + (same_rev ? " matches" : " DIFFERS")};
}

Outcome dsl_fuzz() {
    // A crash has to surface as a failure line, so the fuzzing runs in a child.
    const pid_t pid = ::fork();
    if (pid == 0) {
        CounterRng r(5000);
        const std::string demo = gen::read_file(kDemo);
        for (int i = 0; i < 10000; ++i) {
            std::string text;
            if (i % 2 == 0) {
                const auto len = r.next_u64() % 600;
                for (std::uint64_t k = 0; k < len; ++k) text.push_back(static_cast<char>(r.next_u64() & 0xff));
            } else {
                text = demo;
                for (auto k = 1 + r.next_u64() % 8; k > 0; --k) {
                    const auto at = r.next_u64() % text.size();
                    text[at] = static_cast<char>(r.next_u64() & 0xff);
                }
            }
            const auto res = sdl::parse(text);
            if (!(res.ok() || sdl::has_errors(res.diagnostics))) ::_exit(2);
        }
        ::_exit(0);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    const bool total = WIFEXITED(status) && WEXITSTATUS(status) == 0;

    CounterRng r(5001);
    int round_trips = 0;
    for (int i = 0; i < 1000; ++i) {
        const sdl::SdlDocument doc = gen::sdl_document(r);
        const auto back = sdl::parse(sdl::serialize(doc));
        if (back.ok() && *back.document == doc) ++round_trips;
    }
    return {total && round_trips == 1000,
            std::string("10000 random inputs ") + (total ? "handled" : "CRASHED or returned neither") + ", " +
                std::to_string(round_trips) + "/1000 round trips"};
}

}  // namespace

int main() {
    std::signal(SIGPIPE, SIG_IGN);
    const std::pair<const char*, Outcome (*)()> criteria[] = {
        {"planner soundness", planner_soundness},
        {"determinism", determinism},
        {"collision oracle", collision_oracle},
        {"kinematics", kinematics},
        {"trajectory limits", trajectory_limits},
        {"reconfiguration scenario", reconfiguration},
        {"reject-replan", reject_replan},
        {"crash recovery", crash_recovery},
        {"dsl fuzz", dsl_fuzz},
    };
    int failures = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
