#include "dtwin/robot_sim.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

int main(int argc, char** argv) {
    CLI::App app{"Kinematic robot simulator for the twin's robot link"};
    std::string address, script_path, initial;
    dtwin::SimConfig cfg;
    app.add_option("--twin-address", address, "HOST:PORT of the twin's robot port")->required();
    app.add_option("--dof", cfg.dof, "joint count")->required()->check(CLI::PositiveNumber);
    app.add_option("--tick", cfg.tick_rate, "samples per trajectory second")->check(CLI::PositiveNumber);
    app.add_option("--time-scale", cfg.time_scale, "playback speed factor")->check(CLI::PositiveNumber);
    app.add_option("--script", script_path, "failure and interaction script (JSON)");
    app.add_option("--initial-q", initial, "initial joint configuration (JSON array)");
    app.add_option("--robot-id", cfg.robot_id);
    CLI11_PARSE(app, argc, argv);

    const auto colon = address.rfind(':');
    if (colon == std::string::npos) {
        std::cerr << "robot-sim: --twin-address must be HOST:PORT\n";
        return 1;
    }
    const std::string host = address.substr(0, colon);
    std::uint16_t port = 0;
    try {
        const int p = std::stoi(address.substr(colon + 1));
        if (p <= 0 || p > 65535) throw std::out_of_range("port");
        port = static_cast<std::uint16_t>(p);
    } catch (const std::exception&) {
        std::cerr << "robot-sim: bad port in --twin-address\n";
        return 1;
    }

    try {
        if (!script_path.empty()) {
            std::ifstream in(script_path);
            if (!in) throw std::runtime_error("cannot read " + script_path);
            std::stringstream ss;
            ss << in.rdbuf();
            cfg.script = dtwin::script_from_json(dtwin::parse_json(ss.str()));
        }
        if (!initial.empty()) cfg.initial_q = dtwin::config_from_json(dtwin::parse_json(initial));
        dtwin::validate(cfg);
    } catch (const std::exception& e) {
        std::cerr << "robot-sim: " << e.what() << "\n";
        return 1;
    }

    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    std::signal(SIGPIPE, SIG_IGN);

    dtwin::RobotSim sim(cfg, host, port);
    std::thread runner([&] { sim.run(); });
    int sig = 0;
    sigwait(&set, &sig);
    sim.stop();
    runner.join();
    return 0;
}
