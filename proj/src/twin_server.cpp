#include "dtwin/twin_server.hpp"

#include "dtwin/event_log.hpp"
#include "dtwin/line_socket.hpp"

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <future>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace dtwin {

namespace {

using Clock = std::chrono::steady_clock;

/// Every event ever emitted, for stream replay and polling.
class EventHub {
public:
    void publish(const Event& e) {
        {
            std::lock_guard lock(mu_);
            events_.push_back(e);
        }
        cv_.notify_all();
    }

    void preload(std::vector<Event> events) {
        std::lock_guard lock(mu_);
        events_ = std::move(events);
    }

    /// Events with seq > after, waiting up to `wait` for at least one.
    std::vector<Event> after(std::uint64_t after, std::chrono::milliseconds wait, std::size_t limit) {
        std::unique_lock lock(mu_);
        auto has_new = [&] { return closed_ || (!events_.empty() && events_.back().seq > after); };
        if (wait.count() > 0) cv_.wait_for(lock, wait, has_new);
        std::vector<Event> out;
        auto it = std::upper_bound(events_.begin(), events_.end(), after,
                                   [](std::uint64_t s, const Event& e) { return s < e.seq; });
        for (; it != events_.end() && out.size() < limit; ++it) out.push_back(*it);
        return out;
    }

    void close() {
        {
            std::lock_guard lock(mu_);
            closed_ = true;
        }
        cv_.notify_all();
    }

    bool closed() {
        std::lock_guard lock(mu_);
        return closed_;
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::vector<Event> events_;
    bool closed_ = false;
};

struct HttpError {
    int status;
    Json body;
};

int status_for(EngineErrorCode c) {
    switch (c) {
        case EngineErrorCode::unknown_proposal: return 404;
        case EngineErrorCode::invalid_diff:
        case EngineErrorCode::invalid_request: return 400;
        default: return 409;
    }
}

}  // namespace

struct TwinServer::Impl {
    ServerConfig cfg;
    Engine engine;
    std::unique_ptr<EventLog> log;
    EventHub hub;
    bool recovered = false;
    const Clock::time_point t0 = Clock::now();

    // Engine loop.
    std::mutex q_mu;
    std::condition_variable q_cv;
    std::deque<std::function<void()>> queue;
    std::thread loop_thread;
    std::atomic<bool> running{false};

    // Planner worker: only the newest job matters.
    std::mutex job_mu;
    std::condition_variable job_cv;
    std::optional<PlanJob> next_job;
    std::thread planner_thread;

    // Robot link.
    std::unique_ptr<LineListener> listener;
    std::thread robot_thread;
    std::mutex link_mu;
    std::shared_ptr<LineConnection> link;
    std::string link_robot_id;
    std::size_t link_dof = 0;
    double link_last_heartbeat = 0.0;
    bool link_connected = false;

    httplib::Server http;
    std::thread http_thread;
    std::uint16_t http_port = 0;

    explicit Impl(ServerConfig c) : cfg(std::move(c)), engine(cfg.engine) {}

    double now() const { return std::chrono::duration<double>(Clock::now() - t0).count(); }

    void post(std::function<void()> fn) {
        {
            std::lock_guard lock(q_mu);
            queue.push_back(std::move(fn));
        }
        q_cv.notify_one();
    }

    /// Runs fn on the engine loop and waits for its result.
    template <class F>
    auto call(F fn) -> decltype(fn()) {
        using R = decltype(fn());
        auto task = std::make_shared<std::packaged_task<R()>>(std::move(fn));
        auto fut = task->get_future();
        post([task] { (*task)(); });
        return fut.get();
    }

    void loop() {
        while (true) {
            std::function<void()> fn;
            {
                std::unique_lock lock(q_mu);
                q_cv.wait_for(lock, std::chrono::milliseconds(20), [&] { return !queue.empty() || !running; });
                if (!queue.empty()) {
                    fn = std::move(queue.front());
                    queue.pop_front();
                } else if (!running) {
                    return;
                }
            }
            if (fn) fn();
            engine.flush_telemetry(now());
            drain_effects();
        }
    }

    void drain_effects() {
        while (true) {
            Effects fx = engine.take_effects();
            if (fx.plans.empty() && fx.dispatches.empty() && !fx.abort_robot) return;
            for (auto& job : fx.plans) {
                {
                    std::lock_guard lock(job_mu);
                    next_job = std::move(job);
                }
                job_cv.notify_one();
            }
            for (const auto& d : fx.dispatches) {
                const Json msg{{"type", "execute"}, {"proposal_id", d.proposal_id}, {"trajectory", to_json(d.trajectory)}};
                if (!send_robot(msg)) engine.on_exec_status(d.proposal_id, ExecState::aborted, "robot link send failed");
            }
            if (fx.abort_robot) send_robot({{"type", "abort"}});
        }
    }

    bool send_robot(const Json& msg) {
        std::shared_ptr<LineConnection> c;
        {
            std::lock_guard lock(link_mu);
            c = link;
        }
        return c && c->send_line(canonical(msg));
    }

    void planner_loop() {
        while (true) {
            PlanJob job;
            {
                std::unique_lock lock(job_mu);
                job_cv.wait(lock, [&] { return next_job.has_value() || !running; });
                if (!running) return;
                job = std::move(*next_job);
                next_job.reset();
            }
            PlanOutcome out = run_plan_job(job);
            post([this, out = std::move(out)] { engine.on_plan_result(out); });
        }
    }

    void robot_loop() {
        while (running) {
            std::shared_ptr<LineConnection> c = listener->accept(0.2);
            if (c) session(c);
        }
    }

    void protocol_error(const std::shared_ptr<LineConnection>& c, const std::string& msg) {
        c->send_line(canonical(Json{{"type", "protocol_error"}, {"message", msg}}));
    }

    void session(const std::shared_ptr<LineConnection>& c) {
        bool hello = false;
        std::string robot_id;
        double last_rx = now();
        std::string reason = "connection closed";
        std::string line;
        while (running) {
            const auto r = c->read_line(line, 0.1);
            if (r == LineConnection::Read::timeout) {
                if (now() - last_rx > cfg.heartbeat_timeout) {
                    reason = "heartbeat timeout";
                    break;
                }
                continue;
            }
            if (r == LineConnection::Read::closed) break;
            if (r == LineConnection::Read::overflow) {
                protocol_error(c, "line too long");
                reason = "protocol error";
                break;
            }
            last_rx = now();
            if (line.empty()) continue;
            Json msg;
            std::string type;
            try {
                msg = parse_json(line);
                type = msg.at("type").get<std::string>();
            } catch (const std::exception& e) {
                protocol_error(c, std::string("malformed frame: ") + e.what());
                reason = "protocol error";
                break;
            }
            if (!hello) {
                if (type != "hello") {
                    protocol_error(c, "expected hello");
                    reason = "protocol error";
                    break;
                }
                std::size_t dof = 0;
                try {
                    robot_id = msg.at("robot_id").get<std::string>();
                    dof = msg.at("dof").get<std::size_t>();
                } catch (const std::exception&) {
                    protocol_error(c, "hello needs robot_id and dof");
                    reason = "protocol error";
                    break;
                }
                const auto [ok, revision] = call([&]() -> std::pair<bool, std::uint64_t> {
                    auto s = engine.scene();
                    if (s && s->robot->dof() != dof) return {false, 0};
                    engine.on_robot_link(true, robot_id);
                    return {true, s ? s->revision : 0};
                });
                if (!ok) {
                    protocol_error(c, "dof does not match the twin's robot");
                    reason = "protocol error";
                    break;
                }
                {
                    std::lock_guard lock(link_mu);
                    link = c;
                    link_robot_id = robot_id;
                    link_dof = dof;
                    link_last_heartbeat = now();
                    link_connected = true;
                }
                c->send_line(canonical(Json{{"type", "hello_ack"}, {"scene_revision", revision}}));
                hello = true;
                continue;
            }
            {
                std::lock_guard lock(link_mu);
                link_last_heartbeat = now();
            }
            try {
                if (type == "heartbeat") {
                    continue;
                } else if (type == "joint_state") {
                    const double t = msg.at("t").get<double>();
                    JointConfig q = config_from_json(msg.at("q"));
                    post([this, t, q = std::move(q)] { engine.on_joint_state(t, q, now()); });
                } else if (type == "exec_status") {
                    const std::string pid = msg.at("proposal_id").get<std::string>();
                    const auto st = exec_state_from_string(msg.at("status").get<std::string>());
                    if (!st) throw CodecError("unknown exec status");
                    const std::string why = msg.value("reason", "");
                    post([this, pid, st, why] { engine.on_exec_status(pid, *st, why); });
                } else if (type == "interaction") {
                    SceneDiff d = diff_from_json(msg.at("diff"));
                    post([this, d = std::move(d)] {
                        try {
                            engine.edit_scene(d, "interaction");
                        } catch (const EngineError& e) {
                            std::cerr << "twin: rejected robot interaction: " << e.what() << "\n";
                        }
                    });
                } else {
                    throw CodecError("unknown message type '" + type + "'");
                }
            } catch (const std::exception& e) {
                protocol_error(c, std::string("malformed frame: ") + e.what());
                reason = "protocol error";
                break;
            }
        }
        c->shutdown();
        if (hello) {
            {
                std::lock_guard lock(link_mu);
                if (link == c) {
                    link.reset();
                    link_connected = false;
                }
            }
            call([&] {
                engine.on_robot_link(false, robot_id);
                return 0;
            });
            std::cerr << "twin: robot '" << robot_id << "' disconnected (" << reason << ")\n";
        }
    }

    static void reply(httplib::Response& res, int status, const Json& body) {
        res.status = status;
        res.set_content(canonical(body), "application/json");
    }

    /// Runs fn on the engine loop; maps errors to HTTP statuses.
    template <class F>
    void handle(httplib::Response& res, F fn) {
        try {
            auto [status, body] = call([&]() -> std::pair<int, Json> {
                try {
                    return fn();
                } catch (const EngineError& e) {
                    Json b{{"error", to_string(e.code)}, {"message", e.what()}};
                    if (e.diff_code) b["diff_error"] = to_string(*e.diff_code);
                    return {status_for(e.code), b};
                } catch (const CodecError& e) {
                    return {400, Json{{"error", "malformed_body"}, {"message", e.what()}}};
                } catch (const Json::exception& e) {
                    return {400, Json{{"error", "malformed_body"}, {"message", e.what()}}};
                }
            });
            reply(res, status, body);
        } catch (const std::exception& e) {
            reply(res, 500, Json{{"error", "internal"}, {"message", e.what()}});
        }
    }

    void routes() {
        http.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) {
            handle(res, [&] { return std::pair{200, engine.state_json()}; });
        });
        http.Get("/api/scene", [this](const httplib::Request&, httplib::Response& res) {
            handle(res, [&]() -> std::pair<int, Json> {
                if (!engine.scene()) throw EngineError(EngineErrorCode::not_initialized, "no scene is loaded");
                return {200, scene_to_json(*engine.scene())};
            });
        });
        http.Post("/api/scene/diff", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&]() -> std::pair<int, Json> {
                const SceneDiff d = diff_from_json(parse_json(req.body));
                const std::uint64_t rev = engine.edit_scene(d, "operator");
                return {200, Json{{"scene_revision", rev}, {"state", engine.state_json()}}};
            });
        });
        http.Post("/api/goals", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&]() -> std::pair<int, Json> {
                const Json body = parse_json(req.body);
                const Goal g = goal_from_json(body.at("goal"));
                const PlannerPrefs prefs = prefs_from_json(body);
                const std::string id = engine.submit_goal(g, prefs);
                return {202, Json{{"goal_id", id}}};
            });
        });
        http.Get(R"(/api/proposals/([A-Za-z0-9_]+))", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            handle(res, [&]() -> std::pair<int, Json> {
                const Proposal* p = engine.proposal(id);
                if (!p) throw EngineError(EngineErrorCode::unknown_proposal, "unknown proposal '" + id + "'");
                return {200, to_json(*p)};
            });
        });
        http.Post(R"(/api/proposals/([A-Za-z0-9_]+)/decision)",
                  [this](const httplib::Request& req, httplib::Response& res) {
                      const std::string id = req.matches[1];
                      handle(res, [&]() -> std::pair<int, Json> {
                          const Json body = parse_json(req.body);
                          if (!body.is_object() || !body.contains("approve") || !body["approve"].is_boolean())
                              throw CodecError("body must be {\"approve\": true|false}");
                          engine.decide(id, body["approve"].get<bool>());
                          drain_effects();
                          const Proposal* p = engine.proposal(id);
                          return {200, Json{{"proposal_id", id},
                                            {"status", to_string(p->status)},
                                            {"state", engine.state_json()}}};
                      });
                  });
        http.Post("/api/abort", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&]() -> std::pair<int, Json> {
                std::string why = "operator abort";
                if (!req.body.empty()) why = parse_json(req.body).value("reason", why);
                engine.abort_execution(why);
                return {202, Json{{"state", engine.state_json()}}};
            });
        });
        http.Post("/api/init", [this](const httplib::Request& req, httplib::Response& res) {
            handle(res, [&]() -> std::pair<int, Json> {
                const Json body = parse_json(req.body);
                engine.init_from_dsl(body.at("sdl").get<std::string>());
                return {200, engine.state_json()};
            });
        });
        http.Get("/api/robot", [this](const httplib::Request&, httplib::Response& res) {
            std::lock_guard lock(link_mu);
            Json j{{"state", link_connected ? "connected" : "disconnected"}};
            if (link_connected) {
                j["robot_id"] = link_robot_id;
                j["dof"] = link_dof;
                j["last_heartbeat"] = link_last_heartbeat;
            }
            reply(res, 200, j);
        });
        http.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
            std::uint64_t since = 0;
            std::size_t limit = 1000;
            try {
                if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
                if (req.has_param("limit")) limit = std::stoull(req.get_param_value("limit"));
            } catch (const std::exception&) {
                reply(res, 400, Json{{"error", "malformed_query"}, {"message", "since and limit must be integers"}});
                return;
            }
            Json evs = Json::array();
            std::uint64_t last = since;
            for (const auto& e : hub.after(since, std::chrono::milliseconds(0), limit)) {
                evs.push_back(to_json(e));
                last = e.seq;
            }
            reply(res, 200, Json{{"events", evs}, {"last_seq", last}});
        });
        http.Get("/api/stream", [this](const httplib::Request& req, httplib::Response& res) {
            std::uint64_t start = 0;
            try {
                if (req.has_param("last_seq")) start = std::stoull(req.get_param_value("last_seq"));
            } catch (const std::exception&) {
                reply(res, 400, Json{{"error", "malformed_query"}, {"message", "last_seq must be an integer"}});
                return;
            }
            auto cursor = std::make_shared<std::uint64_t>(start);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider("application/x-ndjson", [this, cursor](std::size_t,
                                                                                    httplib::DataSink& sink) {
                const auto evs = hub.after(*cursor, std::chrono::milliseconds(1000), 256);
                if (hub.closed()) {
                    sink.done();
                    return true;
                }
                if (evs.empty()) return sink.write("\n", 1);  // keepalive
                std::string chunk;
                for (const auto& e : evs) chunk += canonical(to_json(e)) + "\n";
                if (!sink.write(chunk.data(), chunk.size())) return false;
                *cursor = evs.back().seq;
                return true;
            });
        });
        if (!cfg.static_dir.empty()) http.set_mount_point("/", cfg.static_dir);
    }

    void start() {
        Engine recovered_engine(cfg.engine);
        std::vector<Event> past;
        recovered = EventLog::recover(cfg.log_path, cfg.engine, recovered_engine, past);
        if (recovered) {
            engine = std::move(recovered_engine);
            hub.preload(std::move(past));
        }
        log = std::make_unique<EventLog>(cfg.log_path);
        engine.set_sink([this](const Event& e) {
            log->append(e, engine);
            hub.publish(e);
        });

        listener = std::make_unique<LineListener>(cfg.host, cfg.robot_port);
        routes();
        if (cfg.http_port == 0) {
            const int p = http.bind_to_any_port(cfg.host);
            if (p <= 0) throw std::runtime_error("cannot bind http port");
            http_port = static_cast<std::uint16_t>(p);
        } else {
            if (!http.bind_to_port(cfg.host, cfg.http_port))
                throw std::runtime_error("cannot bind http port " + std::to_string(cfg.http_port));
            http_port = cfg.http_port;
        }

        if (recovered) {
            engine.resume();
        } else {
            std::ifstream in(cfg.sdl_path, std::ios::binary);
            if (!in) {
                engine.fail_init("cannot read scene file '" + cfg.sdl_path + "'");
            } else {
                std::stringstream ss;
                ss << in.rdbuf();
                engine.init_from_dsl(ss.str());
            }
        }

        running = true;
        loop_thread = std::thread([this] { loop(); });
        planner_thread = std::thread([this] { planner_loop(); });
        post([this] { drain_effects(); });
        robot_thread = std::thread([this] { robot_loop(); });
        http_thread = std::thread([this] { http.listen_after_bind(); });
        http.wait_until_ready();
    }

    void stop() {
        if (!running.exchange(false)) return;
        hub.close();
        http.stop();
        if (http_thread.joinable()) http_thread.join();
        {
            std::lock_guard lock(link_mu);
            if (link) link->shutdown();
        }
        if (robot_thread.joinable()) robot_thread.join();
        listener->close();
        job_cv.notify_all();
        if (planner_thread.joinable()) planner_thread.join();
        q_cv.notify_all();
        if (loop_thread.joinable()) loop_thread.join();
        log.reset();
    }
};

TwinServer::TwinServer(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

TwinServer::~TwinServer() { stop(); }

void TwinServer::start() { impl_->start(); }

void TwinServer::stop() {
    if (impl_) impl_->stop();
}

std::uint16_t TwinServer::http_port() const { return impl_->http_port; }
std::uint16_t TwinServer::robot_port() const { return impl_->listener ? impl_->listener->port() : 0; }
bool TwinServer::recovered() const { return impl_->recovered; }

}  // namespace dtwin
