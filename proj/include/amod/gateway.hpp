#pragma once

#include "amod/error.hpp"

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

namespace amod {

/// Decoding parameters sent with every chat request.
/// top_p/top_k defaults are ours; only the temperature is pinned by the method.
struct SamplingConfig {
    double temperature = 0.8;
    double top_p = 0.95;
    std::optional<int> top_k = 50;  // nullopt = unlimited
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;

    /// Throws ConfigError on out-of-range values.
    void validate() const;
    bool operator==(const SamplingConfig&) const = default;
};

nlohmann::ordered_json to_json(const SamplingConfig& cfg);

enum class ModelKind { base, coa, aux, external, embedding };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Opaque reference to a serving endpoint. Weights never live in-process.
struct ModelHandle {
    std::string id;
    ModelKind kind = ModelKind::base;
    std::string endpoint_url;
    std::string auth_env_var;
    std::string model;  // model name sent in the request body
};

struct ChatMessage {
    std::string role;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    SamplingConfig sampling;
};

struct ChatResponse {
    std::string content;
    TokenUsage usage;
};

struct ChatExchange {
    std::string handle_id;
    std::vector<ChatMessage> messages;
    SamplingConfig sampling;
    std::string response;
    TokenUsage usage;
    std::chrono::milliseconds latency{0};
    int retries = 0;
};

nlohmann::ordered_json to_json(const ChatExchange& ex);
ChatExchange exchange_from_json(const nlohmann::json& j);

/// Retryable endpoint failure (timeouts, 429, 5xx, connection errors).
class TransientError : public GatewayError {
public:
    using GatewayError::GatewayError;
};

/// Raised by mock backends when no script rule matches; carries the request text.
class UnscriptedRequestError : public GatewayError {
public:
    explicit UnscriptedRequestError(std::string request_text)
        : GatewayError("unscripted request: " + request_text), request_(std::move(request_text)) {}
    const std::string& request_text() const noexcept { return request_; }

private:
    std::string request_;
};

/// Text the mock matches regexes against: message contents joined by "\n".
std::string request_text(const std::vector<ChatMessage>& messages);
/// SHA-256 over the compact JSON array of {role, content} objects.
std::string prompt_digest(const std::vector<ChatMessage>& messages);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Called before any request; throws ConfigError when e.g. a credential is missing.
    virtual void check_ready() const {}
    virtual ChatResponse send(const ChatRequest& request) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    /// Stable identifier used in embedding cache keys.
    virtual std::string endpoint_id() const = 0;
    virtual void check_ready() const {}
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) = 0;
};

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{500};
    double multiplier = 2.0;
    std::chrono::milliseconds max_backoff{30000};

    std::chrono::milliseconds backoff_for(int attempt) const;
};

/// Calls fn() until it succeeds, retrying TransientError up to policy.max_retries
/// times. Writes the number of retries taken to *retries.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn, int* retries = nullptr) -> decltype(fn()) {
    for (int attempt = 0;; ++attempt) {
        try {
            if (retries) *retries = attempt;
            return fn();
        } catch (const TransientError& e) {
            if (attempt >= policy.max_retries)
                throw GatewayError("exhausted " + std::to_string(attempt + 1) +
                                   " attempts; last cause: " + e.what());
            const auto wait = policy.backoff_for(attempt);
            if (wait.count() > 0) std::this_thread::sleep_for(wait);
        }
    }
}

/// Append-only JSONL log of chat exchanges. Appends are serialized.
class RunLog {
public:
    RunLog() = default;  // in-memory only
    explicit RunLog(const std::filesystem::path& path);

    void append(const ChatExchange& ex);
    std::size_t size() const;
    std::vector<ChatExchange> snapshot() const;

private:
    mutable std::mutex mu_;
    std::optional<std::ofstream> out_;
    std::vector<ChatExchange> entries_;
};

std::vector<ChatExchange> read_run_log(const std::filesystem::path& path);

/// One slot of a batch: either an exchange or the error that replaced it.
struct BatchItem {
    std::optional<ChatExchange> exchange;
    std::string error;
    bool ok() const noexcept { return exchange.has_value(); }
};

class MockChatBackend;
struct MockScript;

/// Routes requests for registered handles to live or mock backends, with
/// retries, bounded concurrency, and exchange logging.
class Gateway {
public:
    explicit Gateway(RetryPolicy retry = {}, std::shared_ptr<RunLog> log = std::make_shared<RunLog>());

    void register_backend(const ModelHandle& handle, std::shared_ptr<ChatBackend> backend);
    /// Registers a live chat-completions endpoint for the handle.
    void register_http(const ModelHandle& handle, std::chrono::seconds timeout = std::chrono::seconds(120));
    ModelHandle register_mock(MockScript script, ModelKind kind = ModelKind::base);

    std::shared_ptr<MockChatBackend> mock(const ModelHandle& handle) const;
    bool has(const ModelHandle& handle) const;

    ChatExchange complete(const ModelHandle& handle, const std::vector<ChatMessage>& messages,
                          const SamplingConfig& cfg) const;

    /// Results are in input order; at most max_in_flight requests are outstanding.
    std::vector<BatchItem> complete_batch(const ModelHandle& handle,
                                          const std::vector<std::vector<ChatMessage>>& batch,
                                          const SamplingConfig& cfg, std::size_t max_in_flight) const;

    const RetryPolicy& retry_policy() const noexcept { return retry_; }
    RunLog& log() const noexcept { return *log_; }

private:
    std::shared_ptr<ChatBackend> backend_for(const ModelHandle& handle) const;

    RetryPolicy retry_;
    std::shared_ptr<RunLog> log_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<ChatBackend>> backends_;
};

}  // namespace amod
