#include "amod/gateway.hpp"

#include "amod/digest.hpp"
#include "amod/http_backend.hpp"
#include "amod/mock_backend.hpp"
#include "amod/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace amod {

void SamplingConfig::validate() const {
    if (!(temperature >= 0.0) || !std::isfinite(temperature))
        throw ConfigError("sampling.temperature must be a non-negative number");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("sampling.top_p must be in (0, 1]");
    if (top_k && *top_k < 1) throw ConfigError("sampling.top_k must be positive or unlimited");
    if (max_tokens < 1) throw ConfigError("sampling.max_tokens must be positive");
}

nlohmann::ordered_json to_json(const SamplingConfig& cfg) {
    nlohmann::ordered_json s;
    s["temperature"] = cfg.temperature;
    s["top_p"] = cfg.top_p;
    s["top_k"] = cfg.top_k ? nlohmann::ordered_json(*cfg.top_k) : nlohmann::ordered_json();
    s["max_tokens"] = cfg.max_tokens;
    s["seed"] = cfg.seed ? nlohmann::ordered_json(*cfg.seed) : nlohmann::ordered_json();
    return s;
}

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::base: return "base";
        case ModelKind::coa: return "coa";
        case ModelKind::aux: return "aux";
        case ModelKind::external: return "external";
        case ModelKind::embedding: return "embedding";
    }
    return "base";
}

ModelKind parse_model_kind(std::string_view text) {
    for (auto k : {ModelKind::base, ModelKind::coa, ModelKind::aux, ModelKind::external, ModelKind::embedding})
        if (to_string(k) == text) return k;
    throw ConfigError("unknown model kind " + std::string(text));
}

nlohmann::ordered_json to_json(const ChatExchange& ex) {
    nlohmann::ordered_json j;
    j["handle_id"] = ex.handle_id;
    auto& msgs = j["request"]["messages"];
    msgs = nlohmann::ordered_json::array();
    for (const auto& m : ex.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    j["request"]["sampling"] = to_json(ex.sampling);
    j["response"] = ex.response;
    j["usage"] = {{"prompt_tokens", ex.usage.prompt_tokens}, {"completion_tokens", ex.usage.completion_tokens}};
    j["latency_ms"] = ex.latency.count();
    j["retries"] = ex.retries;
    return j;
}

ChatExchange exchange_from_json(const nlohmann::json& j) {
    ChatExchange ex;
    ex.handle_id = j.at("handle_id").get<std::string>();
    for (const auto& m : j.at("request").at("messages"))
        ex.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
    const auto& s = j.at("request").at("sampling");
    ex.sampling.temperature = s.at("temperature").get<double>();
    ex.sampling.top_p = s.at("top_p").get<double>();
    ex.sampling.top_k = s.at("top_k").is_null() ? std::nullopt : std::optional<int>(s["top_k"].get<int>());
    ex.sampling.max_tokens = s.at("max_tokens").get<int>();
    if (!s.at("seed").is_null()) ex.sampling.seed = s["seed"].get<std::int64_t>();
    ex.response = j.at("response").get<std::string>();
    ex.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<int>();
    ex.usage.completion_tokens = j.at("usage").at("completion_tokens").get<int>();
    ex.latency = std::chrono::milliseconds(j.at("latency_ms").get<std::int64_t>());
    ex.retries = j.at("retries").get<int>();
    return ex;
}

std::string request_text(const std::vector<ChatMessage>& messages) {
    std::string out;
    for (std::size_t i = 0; i < messages.size(); ++i) {
        if (i) out += '\n';
        out += messages[i].content;
    }
    return out;
}

std::string prompt_digest(const std::vector<ChatMessage>& messages) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& m : messages) arr.push_back({{"role", m.role}, {"content", m.content}});
    return sha256_hex(arr.dump());
}

std::chrono::milliseconds RetryPolicy::backoff_for(int attempt) const {
    const double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt);
    return std::min(max_backoff, std::chrono::milliseconds(static_cast<std::int64_t>(ms)));
}

RunLog::RunLog(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.emplace(path, std::ios::binary | std::ios::app);
    if (!*out_) throw Error("cannot open run log " + path.string());
}

void RunLog::append(const ChatExchange& ex) {
    const std::string line = to_json(ex).dump() + "\n";
    std::lock_guard lock(mu_);
    if (out_) {
        *out_ << line;
        out_->flush();
    }
    entries_.push_back(ex);
}

std::size_t RunLog::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::vector<ChatExchange> RunLog::snapshot() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::vector<ChatExchange> read_run_log(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::vector<ChatExchange> out;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(exchange_from_json(nlohmann::json::parse(line)));
    return out;
}

Gateway::Gateway(RetryPolicy retry, std::shared_ptr<RunLog> log)
    : retry_(retry), log_(log ? std::move(log) : std::make_shared<RunLog>()) {}

void Gateway::register_backend(const ModelHandle& handle, std::shared_ptr<ChatBackend> backend) {
    std::lock_guard lock(mu_);
    backends_[handle.id] = std::move(backend);
}

void Gateway::register_http(const ModelHandle& handle, std::chrono::seconds timeout) {
    register_backend(handle, std::make_shared<HttpChatBackend>(handle, timeout));
}

ModelHandle Gateway::register_mock(MockScript script, ModelKind kind) {
    ModelHandle h;
    h.id = script.id;
    h.kind = kind;
    h.endpoint_url = "mock://" + script.id;
    h.model = script.id;
    register_backend(h, std::make_shared<MockChatBackend>(std::move(script)));
    return h;
}

std::shared_ptr<MockChatBackend> Gateway::mock(const ModelHandle& handle) const {
    return std::dynamic_pointer_cast<MockChatBackend>(backend_for(handle));
}

bool Gateway::has(const ModelHandle& handle) const {
    std::lock_guard lock(mu_);
    return backends_.contains(handle.id);
}

std::shared_ptr<ChatBackend> Gateway::backend_for(const ModelHandle& handle) const {
    std::lock_guard lock(mu_);
    auto it = backends_.find(handle.id);
    if (it == backends_.end()) throw ConfigError("no backend registered for model " + handle.id);
    return it->second;
}

ChatExchange Gateway::complete(const ModelHandle& handle, const std::vector<ChatMessage>& messages,
                               const SamplingConfig& cfg) const {
    if (messages.empty()) throw GatewayError("complete: empty message list");
    auto backend = backend_for(handle);
    backend->check_ready();

    ChatRequest req{handle.model, messages, cfg};
    ChatExchange ex;
    ex.handle_id = handle.id;
    ex.messages = messages;
    ex.sampling = cfg;

    const auto start = std::chrono::steady_clock::now();
    auto resp = with_retries(retry_, [&] { return backend->send(req); }, &ex.retries);
    ex.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    ex.response = std::move(resp.content);
    ex.usage = resp.usage;
    log_->append(ex);
    return ex;
}

std::vector<BatchItem> Gateway::complete_batch(const ModelHandle& handle,
                                               const std::vector<std::vector<ChatMessage>>& batch,
                                               const SamplingConfig& cfg,
                                               std::size_t max_in_flight) const {
    if (batch.empty()) throw GatewayError("complete_batch: empty batch");
    if (max_in_flight == 0) throw ConfigError("max_in_flight must be positive");
    backend_for(handle)->check_ready();

    std::vector<BatchItem> out(batch.size());
    bounded_for_each(batch.size(), max_in_flight, [&](std::size_t i) {
        try {
            out[i].exchange = complete(handle, batch[i], cfg);
        } catch (const std::exception& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

}  // namespace amod
