#pragma once

#include "amod/gateway.hpp"

#include <chrono>
#include <string>

namespace amod {

/// Splits "http://host:port/v1" into {"http://host:port", "/v1"}.
std::pair<std::string, std::string> split_endpoint_url(const std::string& url);

/// Reads the credential named by `env_var`; empty name means no auth.
/// Throws ConfigError when the variable is named but unset.
std::string resolve_credential(const std::string& env_var);

/// POST <endpoint_url>/chat/completions in the de-facto chat-completions format.
class HttpChatBackend final : public ChatBackend {
public:
    HttpChatBackend(ModelHandle handle, std::chrono::seconds timeout);

    void check_ready() const override;
    ChatResponse send(const ChatRequest& request) override;

private:
    ModelHandle handle_;
    std::chrono::seconds timeout_;
};

/// POST <endpoint_url>/embeddings with {"model", "input": [...]}.
class HttpEmbeddingBackend final : public EmbeddingBackend {
public:
    HttpEmbeddingBackend(ModelHandle handle, std::chrono::seconds timeout);

    std::string endpoint_id() const override { return handle_.endpoint_url + "#" + handle_.model; }
    void check_ready() const override;
    std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) override;

private:
    ModelHandle handle_;
    std::chrono::seconds timeout_;
};

}  // namespace amod
