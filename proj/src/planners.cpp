#include "dtwin/planners.hpp"

#include "dtwin/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace dtwin {

const char* to_string(PlannerKind k) {
    switch (k) {
        case PlannerKind::rrt: return "rrt";
        case PlannerKind::rrt_star: return "rrt_star";
        case PlannerKind::prm: return "prm";
    }
    return "rrt";
}

std::optional<PlannerKind> planner_from_string(const std::string& s) {
    if (s == "rrt") return PlannerKind::rrt;
    if (s == "rrt_star") return PlannerKind::rrt_star;
    if (s == "prm") return PlannerKind::prm;
    return std::nullopt;
}

const char* to_string(PlanErrorCode c) {
    switch (c) {
        case PlanErrorCode::invalid_start: return "invalid_start";
        case PlanErrorCode::invalid_goal: return "invalid_goal";
        case PlanErrorCode::no_path_found: return "no_path_found";
        case PlanErrorCode::stale_revision: return "stale_revision";
        case PlanErrorCode::invalid_request: return "invalid_request";
    }
    return "invalid_request";
}

double path_length(const Path& p) {
    double len = 0.0;
    for (std::size_t i = 1; i < p.waypoints.size(); ++i) len += (p.waypoints[i] - p.waypoints[i - 1]).norm();
    return len;
}

namespace {

using Clock = std::chrono::steady_clock;

struct Deadline {
    Clock::time_point end;
    explicit Deadline(double seconds)
        : end(Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds))) {}
    bool expired() const { return Clock::now() >= end; }
};

// Separate stream for IK restarts so every planner resolves a pose goal identically.
constexpr std::uint64_t kGoalStream = 0x676f616c5f696b00ULL;

JointConfig random_config(CounterRng& rng, const JointConfig& lo, const JointConfig& hi) {
    JointConfig q(lo.size());
    for (Eigen::Index j = 0; j < q.size(); ++j) q[j] = rng.uniform(lo[j], hi[j]);
    return q;
}

std::size_t nearest(const std::vector<JointConfig>& nodes, const JointConfig& x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double d = (nodes[i] - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

JointConfig steer(const JointConfig& from, const JointConfig& to, double step) {
    const double d = (to - from).norm();
    if (d <= step) return to;
    return from + (to - from) * (step / d);
}

void check_params(const PlanRequest& req) {
    const PlanParams& p = req.params;
    if (!(req.time_budget > 0)) throw PlanError(PlanErrorCode::invalid_request, "time_budget must be positive");
    if (!(p.step_size > 0)) throw PlanError(PlanErrorCode::invalid_request, "step_size must be positive");
    if (!(p.goal_bias >= 0 && p.goal_bias < 1)) throw PlanError(PlanErrorCode::invalid_request, "goal_bias must be in [0, 1)");
    if (!(p.motion_step > 0)) throw PlanError(PlanErrorCode::invalid_request, "motion_step must be positive");
    if (p.prm_samples < 0 || p.prm_k < 1) throw PlanError(PlanErrorCode::invalid_request, "bad roadmap parameters");
    if (!(p.rewire_radius > 0)) throw PlanError(PlanErrorCode::invalid_request, "rewire_radius must be positive");
    if (p.max_iterations < 0 || p.rrt_star_iterations < 0)
        throw PlanError(PlanErrorCode::invalid_request, "iteration caps must be non-negative");
}

struct Endpoints {
    JointConfig start;
    JointConfig goal;
};

Endpoints prepare(const CollisionChecker& checker, const PlanRequest& req) {
    const PlanningScene& scene = checker.scene();
    check_params(req);
    if (req.scene_revision != scene.revision)
        throw PlanError(PlanErrorCode::stale_revision, "request revision " + std::to_string(req.scene_revision) +
                                                           " does not match scene revision " +
                                                           std::to_string(scene.revision));
    const auto dof = static_cast<Eigen::Index>(scene.robot->dof());
    if (req.start.size() != dof) throw PlanError(PlanErrorCode::invalid_request, "start has the wrong dimension");
    if (!req.start.allFinite() || !checker.state_valid(req.start))
        throw PlanError(PlanErrorCode::invalid_start, "start configuration is not valid");
    return {req.start, resolve_goal(checker, req)};
}

void finish_debug(PlanDebug* debug, PlannerKind k, const Path& p) {
    if (!debug) return;
    debug->planner = k;
    if (debug->first_cost == 0.0) debug->first_cost = path_length(p);
    debug->final_cost = path_length(p);
}

struct Tree {
    std::vector<JointConfig> nodes;
    std::vector<std::size_t> parent;
    std::vector<double> cost;
    std::vector<std::vector<std::size_t>> children;

    std::size_t add(JointConfig q, std::size_t par, double c) {
        nodes.push_back(std::move(q));
        parent.push_back(par);
        cost.push_back(c);
        children.emplace_back();
        if (par != npos) children[par].push_back(nodes.size() - 1);
        return nodes.size() - 1;
    }

    std::vector<JointConfig> branch(std::size_t leaf) const {
        std::vector<JointConfig> out;
        for (std::size_t i = leaf; i != npos; i = parent[i]) out.push_back(nodes[i]);
        std::reverse(out.begin(), out.end());
        return out;
    }

    void reparent(std::size_t i, std::size_t par) {
        auto& sib = children[parent[i]];
        sib.erase(std::find(sib.begin(), sib.end(), i));
        parent[i] = par;
        children[par].push_back(i);
        std::vector<std::size_t> stack{i};
        while (!stack.empty()) {
            const std::size_t n = stack.back();
            stack.pop_back();
            cost[n] = cost[parent[n]] + (nodes[n] - nodes[parent[n]]).norm();
            for (const std::size_t c : children[n]) stack.push_back(c);
        }
    }

    void dump(PlanDebug* debug) const {
        if (!debug) return;
        debug->nodes = nodes;
        debug->edges.clear();
        for (std::size_t i = 1; i < nodes.size(); ++i) debug->edges.emplace_back(parent[i], i);
    }

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
};

// One round of tree growth shared by RRT and RRT*, so both consume the
// random stream identically. Returns the index of the added node, or npos.
struct Grower {
    const CollisionChecker& checker;
    const PlanRequest& req;
    const JointConfig& goal;
    JointConfig lo, hi;
    CounterRng rng;

    Grower(const CollisionChecker& c, const PlanRequest& r, const JointConfig& g)
        : checker(c), req(r), goal(g), lo(c.scene().robot->lower_limits()), hi(c.scene().robot->upper_limits()),
          rng(r.seed) {}

    bool clear(const JointConfig& a, const JointConfig& b) const {
        return checker.segment_clear(a, b, req.params.motion_step);
    }

    std::size_t grow(Tree& tree, std::size_t& nearest_out) {
        const JointConfig sample = rng.uniform() < req.params.goal_bias ? goal : random_config(rng, lo, hi);
        const std::size_t n = nearest(tree.nodes, sample);
        JointConfig x = steer(tree.nodes[n], sample, req.params.step_size);
        if (x == tree.nodes[n] || !clear(tree.nodes[n], x)) return Tree::npos;
        nearest_out = n;
        const double c = tree.cost[n] + (x - tree.nodes[n]).norm();
        return tree.add(std::move(x), n, c);
    }

    bool reaches_goal(const JointConfig& x) const {
        return clear(x, goal);
    }
};

Path plan_rrt_impl(const CollisionChecker& checker, const PlanRequest& req, const Endpoints& ep, PlanDebug* debug) {
    if (ep.start == ep.goal) return {{ep.start}};
    Tree tree;
    tree.add(ep.start, Tree::npos, 0.0);
    Grower g(checker, req, ep.goal);
    const Deadline deadline(req.time_budget);
    for (int it = 0; it < req.params.max_iterations; ++it) {
        if ((it & 31) == 0 && deadline.expired()) break;
        if (debug) debug->iterations = static_cast<std::size_t>(it) + 1;
        std::size_t n = 0;
        const std::size_t x = g.grow(tree, n);
        if (x == Tree::npos || !g.reaches_goal(tree.nodes[x])) continue;
        std::vector<JointConfig> wps = tree.branch(x);
        if (wps.back() != ep.goal) wps.push_back(ep.goal);
        tree.dump(debug);
        Path p{std::move(wps)};
        finish_debug(debug, PlannerKind::rrt, p);
        return p;
    }
    tree.dump(debug);
    throw PlanError(PlanErrorCode::no_path_found, "rrt: no path within the budget");
}

Path plan_rrt_star_impl(const CollisionChecker& checker, const PlanRequest& req, const Endpoints& ep,
                        PlanDebug* debug) {
    if (ep.start == ep.goal) return {{ep.start}};
    Grower g(checker, req, ep.goal);
    if (g.clear(ep.start, ep.goal)) {
        Path p{{ep.start, ep.goal}};
        finish_debug(debug, PlannerKind::rrt_star, p);
        if (debug) debug->nodes = p.waypoints, debug->edges = {{0, 1}};
        return p;
    }
    Tree tree;
    tree.add(ep.start, Tree::npos, 0.0);
    std::vector<std::size_t> goal_links;
    double first_cost = 0.0;
    const double radius = req.params.rewire_radius;
    const Deadline deadline(req.time_budget);

    auto best_link = [&]() {
        std::size_t best = Tree::npos;
        double best_c = std::numeric_limits<double>::infinity();
        for (const std::size_t c : goal_links) {
            const double v = tree.cost[c] + (tree.nodes[c] - ep.goal).norm();
            if (v < best_c) best_c = v, best = c;
        }
        return std::pair{best, best_c};
    };

    for (int it = 0; it < req.params.max_iterations; ++it) {
        if (it >= req.params.rrt_star_iterations && !goal_links.empty()) break;
        if ((it & 31) == 0 && deadline.expired()) break;
        if (debug) debug->iterations = static_cast<std::size_t>(it) + 1;
        std::size_t n = 0;
        const std::size_t x = g.grow(tree, n);
        if (x == Tree::npos) continue;
        const JointConfig& qx = tree.nodes[x];

        std::vector<std::size_t> near;
        for (std::size_t i = 0; i < x; ++i) {
            if (i != n && (tree.nodes[i] - qx).norm() <= radius) near.push_back(i);
        }
        // Cheapest parent first; the first clear one wins.
        std::vector<std::pair<double, std::size_t>> order;
        for (const std::size_t i : near) {
            const double c = tree.cost[i] + (tree.nodes[i] - qx).norm();
            if (c < tree.cost[x]) order.emplace_back(c, i);
        }
        std::sort(order.begin(), order.end());
        for (const auto& [c, i] : order) {
            if (g.clear(tree.nodes[i], qx)) {
                tree.reparent(x, i);
                break;
            }
        }
        for (const std::size_t i : near) {
            if (i == tree.parent[x]) continue;
            const double via = tree.cost[x] + (tree.nodes[i] - qx).norm();
            if (via < tree.cost[i] - 1e-12 && g.clear(qx, tree.nodes[i])) tree.reparent(i, x);
        }
        // Only links that could beat the incumbent are worth a sweep.
        const double via_x = tree.cost[x] + (qx - ep.goal).norm();
        if ((goal_links.empty() || via_x < best_link().second) && g.reaches_goal(qx)) {
            goal_links.push_back(x);
            if (goal_links.size() == 1) first_cost = best_link().second;
        }
    }
    tree.dump(debug);
    if (goal_links.empty()) throw PlanError(PlanErrorCode::no_path_found, "rrt_star: no path within the budget");
    const auto [best, best_c] = best_link();
    std::vector<JointConfig> wps = tree.branch(best);
    if (wps.back() != ep.goal) wps.push_back(ep.goal);
    Path p{std::move(wps)};
    if (debug) debug->first_cost = first_cost;
    finish_debug(debug, PlannerKind::rrt_star, p);
    return p;
}

Path plan_prm_impl(const CollisionChecker& checker, const PlanRequest& req, const Endpoints& ep, PlanDebug* debug) {
    if (ep.start == ep.goal) return {{ep.start}};
    const RobotModel& robot = *checker.scene().robot;
    const JointConfig lo = robot.lower_limits(), hi = robot.upper_limits();
    const Deadline deadline(req.time_budget);
    CounterRng rng(req.seed);

    std::vector<JointConfig> nodes{ep.start, ep.goal};
    const long target = req.params.prm_samples;
    for (long attempts = 0; static_cast<long>(nodes.size()) - 2 < target && attempts < 20 * target; ++attempts) {
        if ((attempts & 31) == 0 && deadline.expired())
            throw PlanError(PlanErrorCode::no_path_found, "prm: budget exhausted while sampling");
        JointConfig q = random_config(rng, lo, hi);
        if (checker.state_valid(q)) nodes.push_back(std::move(q));
    }

    const std::size_t k = static_cast<std::size_t>(req.params.prm_k);
    std::set<std::pair<std::size_t, std::size_t>> edge_set;
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        cand.clear();
        for (std::size_t j = 0; j < nodes.size(); ++j) {
            if (j != i) cand.emplace_back((nodes[i] - nodes[j]).squaredNorm(), j);
        }
        const std::size_t m = std::min(k, cand.size());
        std::partial_sort(cand.begin(), cand.begin() + static_cast<long>(m), cand.end());
        for (std::size_t c = 0; c < m; ++c) edge_set.emplace(std::min(i, cand[c].second), std::max(i, cand[c].second));
    }
    const std::vector<std::pair<std::size_t, std::size_t>> edges(edge_set.begin(), edge_set.end());
    std::vector<double> length(edges.size());
    std::vector<std::vector<std::size_t>> adj(nodes.size());
    for (std::size_t e = 0; e < edges.size(); ++e) {
        length[e] = (nodes[edges[e].first] - nodes[edges[e].second]).norm();
        adj[edges[e].first].push_back(e);
        adj[edges[e].second].push_back(e);
    }
    std::vector<int> status(edges.size(), -1);

    auto dump = [&]() {
        if (!debug) return;
        debug->nodes = nodes;
        debug->edges = edges;
        debug->edge_status = status;
    };

    // Lazy evaluation: search the optimistic graph, check only the edges on
    // the candidate path, drop the failures and search again. The result is
    // the shortest path over the fully checked roadmap.
    while (true) {
        if (deadline.expired()) {
            dump();
            throw PlanError(PlanErrorCode::no_path_found, "prm: budget exhausted");
        }
        if (debug) ++debug->iterations;
        std::vector<double> dist(nodes.size(), std::numeric_limits<double>::infinity());
        std::vector<std::size_t> via(nodes.size(), Tree::npos);
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        dist[0] = 0.0;
        pq.emplace(0.0, 0);
        while (!pq.empty()) {
            const auto [d, u] = pq.top();
            pq.pop();
            if (d > dist[u]) continue;
            if (u == 1) break;
            for (const std::size_t e : adj[u]) {
                if (status[e] == 0) continue;
                const std::size_t v = edges[e].first == u ? edges[e].second : edges[e].first;
                const double nd = d + length[e];
                if (nd < dist[v]) {
                    dist[v] = nd;
                    via[v] = e;
                    pq.emplace(nd, v);
                }
            }
        }
        if (!std::isfinite(dist[1])) {
            dump();
            throw PlanError(PlanErrorCode::no_path_found, "prm: start and goal are not connected");
        }
        std::vector<std::size_t> chain;
        std::vector<std::size_t> path_edges;
        for (std::size_t v = 1; v != 0;) {
            chain.push_back(v);
            const std::size_t e = via[v];
            path_edges.push_back(e);
            v = edges[e].first == v ? edges[e].second : edges[e].first;
        }
        chain.push_back(0);
        std::reverse(chain.begin(), chain.end());
        std::reverse(path_edges.begin(), path_edges.end());
        bool ok = true;
        for (std::size_t i = 0; i < path_edges.size(); ++i) {
            const std::size_t e = path_edges[i];
            if (status[e] == -1)
                status[e] = checker.segment_clear(nodes[chain[i]], nodes[chain[i + 1]], req.params.motion_step) ? 1 : 0;
            if (status[e] == 0) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        Path p;
        for (const std::size_t v : chain) p.waypoints.push_back(nodes[v]);
        dump();
        finish_debug(debug, PlannerKind::prm, p);
        return p;
    }
}

}  // namespace

JointConfig resolve_goal(const CollisionChecker& checker, const PlanRequest& req) {
    const RobotModel& robot = *checker.scene().robot;
    const auto dof = static_cast<Eigen::Index>(robot.dof());
    if (const auto* jg = std::get_if<JointGoal>(&req.goal)) {
        if (jg->q.size() != dof) throw PlanError(PlanErrorCode::invalid_request, "joint goal has the wrong dimension");
        if (!jg->q.allFinite() || !checker.state_valid(jg->q))
            throw PlanError(PlanErrorCode::invalid_goal, "joint goal is not a valid configuration");
        return jg->q;
    }
    const auto& pg = std::get<PoseGoal>(req.goal);
    IkOptions opts;
    opts.position_only = pg.position_only;
    CounterRng rng(req.seed ^ kGoalStream);
    const JointConfig lo = robot.lower_limits(), hi = robot.upper_limits();
    JointConfig seed = robot.clamp(req.start);
    for (int attempt = 0; attempt < 10; ++attempt) {
        if (attempt > 0) seed = random_config(rng, lo, hi);
        try {
            JointConfig q = solve_ik(robot, pg.target, seed, opts);
            if (checker.state_valid(q)) return q;
        } catch (const Unreachable&) {
        }
    }
    throw PlanError(PlanErrorCode::invalid_goal, "pose goal has no valid inverse kinematics solution");
}

Path plan_rrt(const PlanningScene& scene, const PlanRequest& req, PlanDebug* debug) {
    const CollisionChecker checker(scene);
    return plan_rrt_impl(checker, req, prepare(checker, req), debug);
}

Path plan_rrt_star(const PlanningScene& scene, const PlanRequest& req, PlanDebug* debug) {
    const CollisionChecker checker(scene);
    return plan_rrt_star_impl(checker, req, prepare(checker, req), debug);
}

Path plan_prm(const PlanningScene& scene, const PlanRequest& req, PlanDebug* debug) {
    const CollisionChecker checker(scene);
    return plan_prm_impl(checker, req, prepare(checker, req), debug);
}

Path plan(const PlanningScene& scene, const PlanRequest& req, PlanDebug* debug) {
    switch (req.planner) {
        case PlannerKind::rrt: return plan_rrt(scene, req, debug);
        case PlannerKind::rrt_star: return plan_rrt_star(scene, req, debug);
        case PlannerKind::prm: return plan_prm(scene, req, debug);
    }
    throw PlanError(PlanErrorCode::invalid_request, "unknown planner");
}

}  // namespace dtwin
