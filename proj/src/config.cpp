#include "amod/config.hpp"

#include "amod/digest.hpp"
#include "amod/error.hpp"
#include "amod/http_backend.hpp"
#include "amod/mock_backend.hpp"

#include <toml.hpp>

#include <set>

namespace amod {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kRoles{"base", "coa", "aux", "external"};

class Reader {
public:
    Reader(const toml::table& root, fs::path base) : root_(root), base_(std::move(base)) {}

    std::vector<std::string> violations;

    template <typename T>
    std::optional<T> get(std::string_view dotted, const char* type_name) {
        auto node = root_.at_path(dotted);
        if (!node) return std::nullopt;
        if (auto v = node.value<T>()) return v;
        violations.push_back(std::string(dotted) + " must be " + type_name);
        return std::nullopt;
    }

    std::optional<std::string> str(std::string_view k) { return get<std::string>(k, "a string"); }
    std::optional<std::int64_t> integer(std::string_view k) { return get<std::int64_t>(k, "an integer"); }
    std::optional<double> real(std::string_view k) { return get<double>(k, "a number"); }
    std::optional<bool> boolean(std::string_view k) { return get<bool>(k, "a boolean"); }

    std::optional<std::size_t> count(std::string_view k) {
        auto v = integer(k);
        if (!v) return std::nullopt;
        if (*v < 0) {
            violations.push_back(std::string(k) + " must be non-negative");
            return std::nullopt;
        }
        return static_cast<std::size_t>(*v);
    }

    fs::path path(std::string_view k) {
        auto v = str(k);
        if (!v || v->empty()) return {};
        fs::path p(*v);
        return p.is_absolute() ? p : base_ / p;
    }

    const fs::path& base() const { return base_; }

private:
    const toml::table& root_;
    fs::path base_;
};

void check_keys(const toml::table& tbl, const std::string& prefix, const std::set<std::string>& known,
                std::vector<std::string>& violations) {
    for (const auto& [key, node] : tbl) {
        const std::string k(key.str());
        if (!known.contains(k)) violations.push_back("unknown key " + prefix + k);
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& toml_text, const fs::path& base_dir) {
    toml::table tbl;
    try {
        tbl = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        throw ConfigError("config: " + std::string(e.description()) + " at line " +
                          std::to_string(e.source().begin.line));
    }

    RunConfig cfg;
    cfg.content_digest = sha256_hex(toml_text);
    Reader r(tbl, base_dir);
    check_keys(tbl, "", {"schema", "corpus", "test_corpus", "templates", "output_dir", "retrieval", "sampling",
                         "gateway", "models", "stage2", "ablation"},
               r.violations);

    if (auto s = r.str("schema")) {
        cfg.schema = *s;
        if (cfg.schema != "fine_grained" && cfg.schema != "aegis" && fs::path(cfg.schema).is_relative())
            cfg.schema = (base_dir / cfg.schema).string();
    }
    cfg.corpus = r.path("corpus");
    cfg.test_corpus = r.path("test_corpus");
    cfg.templates = r.path("templates");
    cfg.output_dir = r.path("output_dir");

    if (auto v = r.str("retrieval.policy")) {
        try {
            cfg.policy = parse_retrieval_policy(*v);
        } catch (const Error& e) {
            r.violations.push_back(std::string("retrieval.policy: ") + e.what());
        }
    }
    if (auto v = r.integer("retrieval.k")) {
        if (*v < 1)
            r.violations.push_back("retrieval.k must be >= 1");
        else
            cfg.k = static_cast<std::size_t>(*v);
    }
    if (auto v = r.integer("retrieval.seed")) cfg.seed = static_cast<std::uint64_t>(*v);
    if (auto v = r.str("retrieval.label_filter")) {
        if (*v == "any")
            cfg.label_filter = LabelFilter::any;
        else if (*v == "same_label")
            cfg.label_filter = LabelFilter::same_label;
        else
            r.violations.push_back("retrieval.label_filter must be any or same_label");
    }

    if (auto v = r.real("sampling.temperature")) cfg.sampling.temperature = *v;
    if (auto v = r.real("sampling.top_p")) cfg.sampling.top_p = *v;
    if (auto v = r.integer("sampling.top_k")) cfg.sampling.top_k = *v == 0 ? std::nullopt : std::optional<int>(int(*v));
    if (auto v = r.integer("sampling.max_tokens")) cfg.sampling.max_tokens = static_cast<int>(*v);
    if (auto v = r.integer("sampling.seed")) cfg.sampling.seed = *v;

    if (auto v = r.count("gateway.max_in_flight")) cfg.max_in_flight = *v;
    if (auto v = r.integer("gateway.max_retries")) cfg.retry.max_retries = static_cast<int>(*v);
    if (auto v = r.integer("gateway.backoff_ms")) cfg.retry.initial_backoff = std::chrono::milliseconds(*v);
    if (auto v = r.boolean("gateway.run_log")) cfg.run_log = *v;

    if (auto* models = tbl["models"].as_table()) {
        std::set<std::string> known(kRoles.begin(), kRoles.end());
        known.insert("embedding");
        check_keys(*models, "models.", known, r.violations);
        for (const auto& role : kRoles) {
            if (!models->contains(role)) continue;
            const auto prefix = "models." + role;
            ModelConfig m;
            m.kind = parse_model_kind(role);
            m.id = r.str(prefix + ".id").value_or(role);
            m.endpoint = r.str(prefix + ".endpoint").value_or("");
            m.auth_env = r.str(prefix + ".auth_env").value_or("");
            m.model = r.str(prefix + ".model").value_or("");
            m.mock = r.path(prefix + ".mock");
            cfg.models[role] = m;
        }
        if (models->contains("embedding")) {
            auto& e = cfg.embedding;
            e.endpoint = r.str("models.embedding.endpoint").value_or("");
            e.auth_env = r.str("models.embedding.auth_env").value_or("");
            e.model = r.str("models.embedding.model").value_or("");
            e.mock = r.str("models.embedding.mock").value_or("");
            if (auto v = r.count("models.embedding.dim")) e.dim = *v;
            if (auto v = r.count("models.embedding.batch_size")) e.batch_size = *v;
        }
    }

    if (auto v = r.count("stage2.analogies")) cfg.virtual_analogies = *v;
    if (auto v = r.real("stage2.review_fraction")) cfg.review_fraction = *v;
    if (auto v = r.integer("stage2.review_seed")) cfg.review_seed = static_cast<std::uint64_t>(*v);
    if (auto v = r.boolean("ablation.no_knn")) cfg.no_knn = *v;
    if (auto v = r.boolean("ablation.skip_stage3")) cfg.skip_stage3 = *v;

    auto violations = std::move(r.violations);
    for (auto& v : validate_run_config(cfg)) violations.push_back(std::move(v));
    if (!violations.empty()) {
        std::string msg = "invalid run config (" + std::to_string(violations.size()) + " problems):";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw ConfigError(msg);
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
    auto cfg = parse_run_config(read_file(path), fs::absolute(path).parent_path());
    cfg.source = path;
    return cfg;
}

std::vector<std::string> validate_run_config(const RunConfig& cfg) {
    std::vector<std::string> out;
    auto need_file = [&](const fs::path& p, const std::string& key) {
        if (p.empty())
            out.push_back(key + " is required");
        else if (!fs::exists(p))
            out.push_back(key + " does not exist: " + p.string());
    };
    need_file(cfg.corpus, "corpus");
    need_file(cfg.templates, "templates");
    if (!cfg.test_corpus.empty() && !fs::exists(cfg.test_corpus))
        out.push_back("test_corpus does not exist: " + cfg.test_corpus.string());
    if (cfg.output_dir.empty()) out.push_back("output_dir is required");
    if (cfg.schema != "fine_grained" && cfg.schema != "aegis" && !fs::exists(cfg.schema))
        out.push_back("schema is neither a builtin (fine_grained, aegis) nor an existing file: " + cfg.schema);
    if (cfg.k < 1) out.push_back("retrieval.k must be >= 1");
    try {
        cfg.sampling.validate();
    } catch (const ConfigError& e) {
        out.push_back(std::string("sampling: ") + e.what());
    }
    if (cfg.max_in_flight < 1) out.push_back("gateway.max_in_flight must be >= 1");
    if (cfg.retry.max_retries < 0) out.push_back("gateway.max_retries must be >= 0");
    if (cfg.retry.initial_backoff.count() < 0) out.push_back("gateway.backoff_ms must be >= 0");
    if (cfg.virtual_analogies < 1) out.push_back("stage2.analogies must be >= 1");
    if (cfg.review_fraction < 0.0 || cfg.review_fraction > 1.0) out.push_back("stage2.review_fraction must be in [0, 1]");

    for (const auto& [role, m] : cfg.models) {
        const auto key = "models." + role;
        if (m.endpoint.empty() == m.mock.empty())
            out.push_back(key + " needs exactly one of endpoint or mock");
        else if (!m.mock.empty() && !fs::exists(m.mock))
            out.push_back(key + ".mock does not exist: " + m.mock.string());
        if (!m.endpoint.empty() && m.model.empty()) out.push_back(key + ".model is required for an endpoint");
    }
    const auto& e = cfg.embedding;
    if (e.endpoint.empty() == e.mock.empty())
        out.push_back("models.embedding needs exactly one of endpoint or mock");
    if (!e.mock.empty() && e.mock != "tokens" && e.mock != "random")
        out.push_back("models.embedding.mock must be tokens or random");
    if (e.dim < 1) out.push_back("models.embedding.dim must be >= 1");
    if (e.batch_size < 1) out.push_back("models.embedding.batch_size must be >= 1");
    return out;
}

std::map<std::string, ModelHandle> register_models(const RunConfig& cfg, Gateway& gateway) {
    std::map<std::string, ModelHandle> out;
    for (const auto& [role, m] : cfg.models) {
        if (!m.mock.empty()) {
            auto script = MockScript::load(m.mock);
            out[role] = gateway.register_mock(std::move(script), m.kind);
        } else {
            ModelHandle h{m.id, m.kind, m.endpoint, m.auth_env, m.model};
            gateway.register_http(h);
            out[role] = h;
        }
    }
    return out;
}

std::shared_ptr<EmbeddingBackend> make_embedding_backend(const RunConfig& cfg) {
    const auto& e = cfg.embedding;
    if (!e.mock.empty())
        return std::make_shared<MockEmbeddingBackend>(
            "embedding", e.dim, e.mock == "random" ? MockEmbeddingBackend::Mode::random : MockEmbeddingBackend::Mode::tokens);
    return std::make_shared<HttpEmbeddingBackend>(ModelHandle{"embedding", ModelKind::embedding, e.endpoint, e.auth_env, e.model},
                                                  std::chrono::seconds(120));
}

nlohmann::ordered_json to_json(const RunConfig& cfg) {
    nlohmann::ordered_json j;
    j["config_digest"] = cfg.content_digest;
    j["schema"] = cfg.schema;
    j["retrieval"] = {{"policy", to_string(cfg.policy)}, {"k", cfg.k}, {"seed", cfg.seed},
                      {"label_filter", cfg.label_filter == LabelFilter::any ? "any" : "same_label"}};
    j["sampling"] = to_json(cfg.sampling);
    j["gateway"] = {{"max_in_flight", cfg.max_in_flight}, {"max_retries", cfg.retry.max_retries},
                    {"backoff_ms", cfg.retry.initial_backoff.count()}};
    j["models"] = nlohmann::ordered_json::object();
    for (const auto& [role, m] : cfg.models)
        j["models"][role] = m.mock.empty() ? nlohmann::ordered_json{{"endpoint", m.endpoint}, {"model", m.model}}
                                           : nlohmann::ordered_json{{"mock", m.mock.filename().string()}};
    j["embedding"] = cfg.embedding.mock.empty()
                         ? nlohmann::ordered_json{{"endpoint", cfg.embedding.endpoint}, {"model", cfg.embedding.model}}
                         : nlohmann::ordered_json{{"mock", cfg.embedding.mock}, {"dim", cfg.embedding.dim}};
    j["stage2"] = {{"analogies", cfg.virtual_analogies}, {"review_fraction", cfg.review_fraction},
                   {"review_seed", cfg.review_seed}};
    j["ablation"] = {{"no_knn", cfg.no_knn}, {"skip_stage3", cfg.skip_stage3}};
    return j;
}

}  // namespace amod
