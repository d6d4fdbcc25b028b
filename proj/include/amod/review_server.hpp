#pragma once

#include "amod/review.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace amod {

/// HTTP front end of a ReviewStore.
///
///   POST /session                      create a session (operator)
///   GET  /session/{id}/next?annotator= blinded pair or {"done": true}
///   GET  /session/{id}/progress?annotator=
///   POST /session/{id}/verdict         {"annotator", "pair_id", "choice"}
///   GET  /session/{id}/report          aggregated preferences (operator)
///   GET  /rule-review/{name}/next
///   POST /rule-review/{name}/decision  {"rule_id", "approved", "reviewer"}
///
/// Anything else is served from the static directory when one is given.
class ReviewServer {
public:
    explicit ReviewServer(std::shared_ptr<ReviewStore> store,
                          std::optional<std::filesystem::path> static_dir = std::nullopt);
    ~ReviewServer();
    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    /// Port 0 picks a free port. Returns the bound port; throws Error on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void listen();
    /// listen() on a background thread.
    void start();
    void stop();

private:
    std::shared_ptr<ReviewStore> store_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
};

}  // namespace amod
