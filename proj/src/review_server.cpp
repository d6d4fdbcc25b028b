#include "amod/review_server.hpp"

#include <httplib.h>

namespace amod {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const ReviewError& e) {
            send_json(res, e.status(), {{"error", e.what()}});
        } catch (const nlohmann::json::exception& e) {
            send_json(res, 400, {{"error", std::string("bad request body: ") + e.what()}});
        } catch (const std::exception& e) {
            send_json(res, 500, {{"error", e.what()}});
        }
    };
}

std::string required_param(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) throw ReviewError(400, std::string("missing query parameter ") + name);
    return req.get_param_value(name);
}

}  // namespace

ReviewServer::ReviewServer(std::shared_ptr<ReviewStore> store, std::optional<std::filesystem::path> static_dir)
    : store_(std::move(store)), server_(std::make_unique<httplib::Server>()) {
    auto& s = *server_;
    auto store_ptr = store_;

    s.Post("/session", guarded([store_ptr](const httplib::Request& req, httplib::Response& res) {
        const auto j = nlohmann::json::parse(req.body);
        SessionSpec spec;
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.method_a = j.value("method_a", spec.method_a);
        spec.method_b = j.value("method_b", spec.method_b);
        spec.allow_ties = j.value("allow_ties", false);
        spec.annotators = j.at("annotators").get<std::vector<std::string>>();
        for (const auto& p : j.at("pairs"))
            spec.pairs.push_back({p.at("a").get<std::string>(), p.at("b").get<std::string>(),
                                  p.value("context", std::string())});
        const auto id = store_ptr->create_session(spec);
        send_json(res, 201, {{"session_id", id}});
    }));

    s.Get(R"(/session/([^/]+)/next)", guarded([store_ptr](const httplib::Request& req, httplib::Response& res) {
        const auto pair = store_ptr->next_pair(req.matches[1], required_param(req, "annotator"));
        if (pair)
            send_json(res, 200, to_json(*pair));
        else
            send_json(res, 200, {{"done", true}});
    }));

    s.Get(R"(/session/([^/]+)/progress)", guarded([store_ptr](const httplib::Request& req, httplib::Response& res) {
        const auto [judged, total] = store_ptr->progress(req.matches[1], required_param(req, "annotator"));
        send_json(res, 200, {{"judged", judged}, {"total", total}});
    }));

    s.Post(R"(/session/([^/]+)/verdict)", guarded([store_ptr](const httplib::Request& req, httplib::Response& res) {
        const auto j = nlohmann::json::parse(req.body);
        const std::string id = req.matches[1];
        const auto annotator = j.at("annotator").get<std::string>();
        store_ptr->submit_verdict(id, annotator, j.at("pair_id").get<std::string>(),
                                  parse_choice(j.at("choice").get<std::string>()));
        const auto [judged, total] = store_ptr->progress(id, annotator);
        send_json(res, 200, {{"ok", true}, {"judged", judged}, {"total", total}});
    }));

    s.Get(R"(/session/([^/]+)/report)", guarded([store_ptr](const httplib::Request& req, httplib::Response& res) {
        send_json(res, 200, to_json(store_ptr->report(req.matches[1])));
    }));

    s.Get(R"(/rule-review/([^/]+)/next)", guarded([store_ptr](const httplib::Request& req, httplib::Response& res) {
        const auto item = store_ptr->next_rule(req.matches[1]);
        if (item)
            send_json(res, 200, *item);
        else
            send_json(res, 200, {{"done", true}});
    }));

    s.Post(R"(/rule-review/([^/]+)/decision)",
           guarded([store_ptr](const httplib::Request& req, httplib::Response& res) {
               const auto j = nlohmann::json::parse(req.body);
               store_ptr->decide_rule(req.matches[1], j.at("rule_id").get<std::string>(),
                                      j.at("approved").get<bool>(), j.value("reviewer", std::string()));
               send_json(res, 200, {{"ok", true}});
           }));

    if (static_dir) {
        if (!s.set_mount_point("/", static_dir->string()))
            throw Error("static directory not found: " + static_dir->string());
    }
}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = server_->bind_to_any_port(host);
        if (bound < 0) throw Error("cannot bind " + host);
        return bound;
    }
    if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void ReviewServer::listen() { server_->listen_after_bind(); }

void ReviewServer::start() {
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

void ReviewServer::stop() {
    if (server_) server_->stop();
    if (thread_.joinable()) thread_.join();
}

}  // namespace amod
