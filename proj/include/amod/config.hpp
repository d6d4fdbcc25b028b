#pragma once

#include "amod/embedding.hpp"
#include "amod/gateway.hpp"
#include "amod/vector_index.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace amod {

/// A chat model served either by an HTTP endpoint or by a mock script file.
struct ModelConfig {
    std::string id;
    ModelKind kind = ModelKind::base;
    std::string endpoint;
    std::string auth_env;
    std::string model;
    std::filesystem::path mock;  // empty when live
};

struct EmbeddingConfig {
    std::string endpoint;
    std::string auth_env;
    std::string model;
    std::string mock;  // "tokens" or "random"; empty when live
    std::size_t dim = 64;
    std::size_t batch_size = 32;
};

/// Declarative run description loaded from TOML. Relative paths are resolved
/// against the directory of the config file.
struct RunConfig {
    std::filesystem::path source;
    std::string content_digest;  // SHA-256 of the config file

    std::string schema = "fine_grained";
    std::filesystem::path corpus;
    std::filesystem::path test_corpus;
    std::filesystem::path templates;
    std::filesystem::path output_dir;

    RetrievalPolicy policy = RetrievalPolicy::knn;
    std::size_t k = kDefaultNeighbors;
    std::uint64_t seed = 0;
    LabelFilter label_filter = LabelFilter::any;

    SamplingConfig sampling;
    std::size_t max_in_flight = 8;
    RetryPolicy retry;
    bool run_log = true;

    std::map<std::string, ModelConfig> models;  // base, coa, aux, external
    EmbeddingConfig embedding;

    std::size_t virtual_analogies = 4;
    double review_fraction = 0.0;
    std::uint64_t review_seed = 0;

    bool no_knn = false;
    bool skip_stage3 = false;
};

/// Parses and validates; throws ConfigError whose message lists every violation, one per line.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& toml_text, const std::filesystem::path& base_dir);

/// Checks invariants that depend on the file system (paths exist) and value ranges.
std::vector<std::string> validate_run_config(const RunConfig& cfg);

/// Registers every configured chat model and returns their handles keyed by role.
std::map<std::string, ModelHandle> register_models(const RunConfig& cfg, Gateway& gateway);

std::shared_ptr<EmbeddingBackend> make_embedding_backend(const RunConfig& cfg);

nlohmann::ordered_json to_json(const RunConfig& cfg);

}  // namespace amod
