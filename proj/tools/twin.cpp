#include "dtwin/engine.hpp"
#include "dtwin/sdl.hpp"
#include "dtwin/twin_server.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

bool read_file(const std::string& path, std::string& out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::stringstream ss;
    ss << in.rdbuf();
    out = ss.str();
    return true;
}

int cmd_validate(const std::string& path) {
    std::string src;
    if (!read_file(path, src)) {
        std::cerr << path << ": cannot read file\n";
        return 1;
    }
    const auto r = dtwin::sdl::parse(src);
    for (const auto& d : r.diagnostics) std::cout << path << ":" << dtwin::sdl::to_string(d) << "\n";
    if (!r.ok()) return 1;
    try {
        (void)dtwin::sdl::to_scene_model(*r.document);
    } catch (const std::exception& e) {
        std::cout << path << ": error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

int cmd_plan(const std::string& path, const std::string& goal_text, const std::string& planner, std::uint64_t seed,
             double budget) {
    using namespace dtwin;
    std::string src;
    if (!read_file(path, src)) {
        std::cerr << path << ": cannot read file\n";
        return 1;
    }
    const auto r = sdl::parse(src);
    if (!r.ok()) {
        for (const auto& d : r.diagnostics) std::cerr << path << ":" << sdl::to_string(d) << "\n";
        return 1;
    }
    PlanJob job;
    try {
        job.scene = std::make_shared<const PlanningScene>(from_scene_model(sdl::to_scene_model(*r.document)));
        job.request.goal = goal_from_json(parse_json(goal_text));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    const auto kind = planner_from_string(planner);
    if (!kind) {
        std::cerr << "error: unknown planner '" << planner << "'\n";
        return 1;
    }
    job.prefs.planner = *kind;
    job.prefs.time_budget = budget;
    job.request.scene_revision = job.scene->revision;
    job.request.start = job.scene->current_q;
    job.request.planner = *kind;
    job.request.seed = seed;
    job.request.time_budget = budget;
    job.request.params = job.prefs.params;
    const PlanOutcome out = run_plan_job(job);
    if (!out.trajectory) {
        std::cerr << canonical(Json{{"error", to_string(out.error)}, {"message", out.message}}) << "\n";
        return 2;
    }
    std::cout << canonical(to_json(*out.trajectory)) << "\n";
    return 0;
}

int cmd_serve(dtwin::ServerConfig cfg) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    dtwin::TwinServer server(cfg);
    try {
        server.start();
    } catch (const std::exception& e) {
        std::cerr << "twin: " << e.what() << "\n";
        return 1;
    }
    std::cout << "twin: ready http=" << cfg.host << ":" << server.http_port() << " robot=" << cfg.host << ":"
              << server.robot_port() << (server.recovered() ? " recovered" : "") << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Digital twin for robotic reconfiguration"};
    app.require_subcommand(1);

    dtwin::ServerConfig cfg;
    auto* serve = app.add_subcommand("serve", "run the twin server");
    serve->add_option("--sdl", cfg.sdl_path, "scene description file")->required();
    serve->add_option("--http-port", cfg.http_port, "HTTP port, 0 picks a free one");
    serve->add_option("--robot-port", cfg.robot_port, "robot link port, 0 picks a free one");
    serve->add_option("--log", cfg.log_path, "event log path");
    serve->add_option("--host", cfg.host, "bind address");
    serve->add_option("--static-dir", cfg.static_dir, "operator UI assets served at /");
    serve->add_option("--heartbeat-timeout", cfg.heartbeat_timeout, "seconds of robot silence before disconnect");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate", "check a scene description");
    validate->add_option("file", validate_path)->required();

    std::string plan_sdl, goal, planner = "rrt_star";
    std::uint64_t seed = 0;
    double budget = 2.0;
    auto* plan = app.add_subcommand("plan", "plan once offline and print the trajectory");
    plan->add_option("--sdl", plan_sdl)->required();
    plan->add_option("--goal", goal, "goal JSON")->required();
    plan->add_option("--planner", planner)->check(CLI::IsMember({"rrt", "rrt_star", "prm"}));
    plan->add_option("--seed", seed);
    plan->add_option("--time-budget", budget);

    CLI11_PARSE(app, argc, argv);

    if (*serve) return cmd_serve(cfg);
    if (*validate) return cmd_validate(validate_path);
    return cmd_plan(plan_sdl, goal, planner, seed, budget);
}
