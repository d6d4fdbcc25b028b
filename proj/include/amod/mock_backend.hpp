#pragma once

#include "amod/gateway.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace amod {

/// One scripted behavior. A rule matches by exact prompt digest or by a regex
/// searched in the request text; `response` may reference capture groups as $1.
struct MockRule {
    std::optional<std::string> digest;
    std::optional<std::string> pattern;
    std::string response;
    int fail_times = 0;         // fail this many matching calls before answering
    bool always_fail = false;
    std::string failure = "timeout";  // timeout | rate_limit | server_error | bad_request
    std::chrono::milliseconds delay{0};
};

struct MockScript {
    std::string id;
    std::vector<MockRule> rules;

    static MockScript from_json(const nlohmann::json& j);
    static MockScript load(const std::filesystem::path& path);
    /// Digest rules reproducing every exchange logged for `handle_id`.
    static MockScript from_run_log(const std::vector<ChatExchange>& exchanges,
                                   const std::string& handle_id);
    nlohmann::ordered_json to_json() const;
};

/// Deterministic scripted chat backend. Digest rules are consulted first,
/// then regex rules in script order.
class MockChatBackend final : public ChatBackend {
public:
    explicit MockChatBackend(MockScript script);

    ChatResponse send(const ChatRequest& request) override;

    const std::string& id() const noexcept { return script_.id; }
    std::size_t call_count() const;
    std::vector<std::string> calls() const;
    std::size_t max_concurrency() const noexcept { return high_water_.load(); }

private:
    struct CompiledRule;

    MockScript script_;
    std::vector<std::shared_ptr<CompiledRule>> compiled_;
    mutable std::mutex mu_;
    std::vector<std::string> calls_;
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> high_water_{0};
};

/// Deterministic offline embedding endpoint.
///   tokens: signed feature hashing of lowercase word tokens (similar texts land close)
///   random: one Gaussian vector seeded by the text hash
class MockEmbeddingBackend final : public EmbeddingBackend {
public:
    enum class Mode { tokens, random };

    MockEmbeddingBackend(std::string id, std::size_t dim, Mode mode = Mode::tokens, double scale = 1.0);

    std::string endpoint_id() const override { return "mock://" + id_; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

    std::size_t request_count() const noexcept { return requests_.load(); }
    std::size_t text_count() const noexcept { return texts_.load(); }

private:
    std::string id_;
    std::size_t dim_;
    Mode mode_;
    double scale_;
    std::atomic<std::size_t> requests_{0};
    std::atomic<std::size_t> texts_{0};
};

}  // namespace amod
