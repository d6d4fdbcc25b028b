#include "amod/http_backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>

namespace amod {

namespace {

bool is_transient_status(int status) {
    return status == 408 || status == 409 || status == 429 || status >= 500;
}

nlohmann::json post_json(const std::string& endpoint_url, const std::string& path_suffix,
                         const std::string& credential, const nlohmann::json& body,
                         std::chrono::seconds timeout) {
    const auto [base, prefix] = split_endpoint_url(endpoint_url);
    httplib::Client cli(base);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!credential.empty()) headers.emplace("Authorization", "Bearer " + credential);

    auto res = cli.Post(prefix + path_suffix, headers, body.dump(), "application/json");
    if (!res) throw TransientError("POST " + endpoint_url + path_suffix + ": " + httplib::to_string(res.error()));
    if (res->status != 200) {
        const std::string msg = "POST " + endpoint_url + path_suffix + ": HTTP " +
                                std::to_string(res->status) + " " + res->body.substr(0, 200);
        if (is_transient_status(res->status)) throw TransientError(msg);
        throw GatewayError(msg);
    }
    try {
        return nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError("POST " + endpoint_url + path_suffix + ": invalid JSON response: " + e.what());
    }
}

}  // namespace

std::pair<std::string, std::string> split_endpoint_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string path = url.substr(path_start);
    while (!path.empty() && path.back() == '/') path.pop_back();
    return {url.substr(0, path_start), path};
}

std::string resolve_credential(const std::string& env_var) {
    if (env_var.empty()) return {};
    const char* value = std::getenv(env_var.c_str());
    if (!value || !*value) throw ConfigError("credential environment variable " + env_var + " is not set");
    return value;
}

HttpChatBackend::HttpChatBackend(ModelHandle handle, std::chrono::seconds timeout)
    : handle_(std::move(handle)), timeout_(timeout) {}

void HttpChatBackend::check_ready() const { resolve_credential(handle_.auth_env_var); }

ChatResponse HttpChatBackend::send(const ChatRequest& request) {
    const std::string credential = resolve_credential(handle_.auth_env_var);
    nlohmann::json body;
    body["model"] = request.model;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    body["temperature"] = request.sampling.temperature;
    body["top_p"] = request.sampling.top_p;
    if (request.sampling.top_k) body["top_k"] = *request.sampling.top_k;
    body["max_tokens"] = request.sampling.max_tokens;
    if (request.sampling.seed) body["seed"] = *request.sampling.seed;
    body["n"] = 1;
    body["stream"] = false;

    const auto reply = post_json(handle_.endpoint_url, "/chat/completions", credential, body, timeout_);
    ChatResponse resp;
    try {
        const auto& choices = reply.at("choices");
        if (choices.empty()) throw GatewayError("chat completion returned no choices");
        resp.content = choices.at(0).at("message").at("content").get<std::string>();
        if (reply.contains("usage")) {
            resp.usage.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
            resp.usage.completion_tokens = reply["usage"].value("completion_tokens", 0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError(std::string("malformed chat completion: ") + e.what());
    }
    return resp;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(ModelHandle handle, std::chrono::seconds timeout)
    : handle_(std::move(handle)), timeout_(timeout) {}

void HttpEmbeddingBackend::check_ready() const { resolve_credential(handle_.auth_env_var); }

std::vector<std::vector<double>> HttpEmbeddingBackend::embed(const std::vector<std::string>& texts) {
    const std::string credential = resolve_credential(handle_.auth_env_var);
    nlohmann::json body{{"model", handle_.model}, {"input", texts}};
    const auto reply = post_json(handle_.endpoint_url, "/embeddings", credential, body, timeout_);

    std::vector<std::vector<double>> out(texts.size());
    try {
        const auto& data = reply.at("data");
        if (data.size() != texts.size())
            throw GatewayError("embedding endpoint returned " + std::to_string(data.size()) +
                               " vectors for " + std::to_string(texts.size()) + " inputs");
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto idx = data[i].value("index", i);
            if (idx >= out.size()) throw GatewayError("embedding index out of range");
            out[idx] = data[i].at("embedding").get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw GatewayError(std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

}  // namespace amod
