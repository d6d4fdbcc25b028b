#include "amod/mock_backend.hpp"

#include "amod/digest.hpp"

#include <boost/regex.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace amod {

namespace {

int count_words(std::string_view s) {
    int n = 0;
    bool in_word = false;
    for (char c : s) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

[[noreturn]] void raise_failure(const std::string& kind, const std::string& mock_id) {
    const std::string msg = "mock " + mock_id + ": scripted " + kind;
    if (kind == "bad_request") throw GatewayError(msg);
    throw TransientError(msg);
}

}  // namespace

MockScript MockScript::from_json(const nlohmann::json& j) {
    MockScript s;
    s.id = j.at("id").get<std::string>();
    for (const auto& r : j.at("rules")) {
        MockRule rule;
        if (r.contains("digest")) rule.digest = r["digest"].get<std::string>();
        if (r.contains("regex")) rule.pattern = r["regex"].get<std::string>();
        if (!rule.digest && !rule.pattern)
            throw ConfigError("mock " + s.id + ": rule needs a digest or a regex");
        rule.response = r.value("response", std::string());
        rule.fail_times = r.value("fail_times", 0);
        rule.always_fail = r.value("always_fail", false);
        rule.failure = r.value("failure", std::string("timeout"));
        rule.delay = std::chrono::milliseconds(r.value("delay_ms", 0));
        s.rules.push_back(std::move(rule));
    }
    return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    try {
        return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("mock script " + path.string() + ": " + e.what());
    }
}

MockScript MockScript::from_run_log(const std::vector<ChatExchange>& exchanges,
                                    const std::string& handle_id) {
    MockScript s;
    s.id = handle_id;
    for (const auto& ex : exchanges) {
        if (ex.handle_id != handle_id) continue;
        MockRule rule;
        rule.digest = prompt_digest(ex.messages);
        rule.response = ex.response;
        s.rules.push_back(std::move(rule));
    }
    return s;
}

nlohmann::ordered_json MockScript::to_json() const {
    nlohmann::ordered_json j;
    j["id"] = id;
    j["rules"] = nlohmann::ordered_json::array();
    for (const auto& r : rules) {
        nlohmann::ordered_json o;
        if (r.digest) o["digest"] = *r.digest;
        if (r.pattern) o["regex"] = *r.pattern;
        o["response"] = r.response;
        if (r.fail_times) o["fail_times"] = r.fail_times;
        if (r.always_fail) o["always_fail"] = true;
        if (r.fail_times || r.always_fail) o["failure"] = r.failure;
        if (r.delay.count()) o["delay_ms"] = r.delay.count();
        j["rules"].push_back(std::move(o));
    }
    return j;
}

struct MockChatBackend::CompiledRule {
    MockRule rule;
    std::optional<boost::regex> regex;
    int failures_served = 0;
};

MockChatBackend::MockChatBackend(MockScript script) : script_(std::move(script)) {
    for (const auto& r : script_.rules) {
        auto c = std::make_shared<CompiledRule>();
        c->rule = r;
        if (r.pattern) {
            try {
                c->regex.emplace(*r.pattern, boost::regex::perl);
            } catch (const boost::regex_error& e) {
                throw ConfigError("mock " + script_.id + ": bad regex " + *r.pattern + ": " + e.what());
            }
        }
        compiled_.push_back(std::move(c));
    }
}

ChatResponse MockChatBackend::send(const ChatRequest& request) {
    const auto now = ++in_flight_;
    for (auto seen = high_water_.load(); now > seen && !high_water_.compare_exchange_weak(seen, now);) {}
    struct Leave {
        std::atomic<std::size_t>& n;
        ~Leave() { --n; }
    } leave{in_flight_};

    const std::string text = request_text(request.messages);
    {
        std::lock_guard lock(mu_);
        calls_.push_back(text);
    }

    const std::string digest = prompt_digest(request.messages);
    CompiledRule* hit = nullptr;
    boost::smatch match;
    for (auto& c : compiled_)
        if (c->rule.digest && *c->rule.digest == digest) {
            hit = c.get();
            break;
        }
    if (!hit) {
        for (auto& c : compiled_)
            if (c->regex && boost::regex_search(text, match, *c->regex)) {
                hit = c.get();
                break;
            }
    }
    if (!hit) throw UnscriptedRequestError(text);

    if (hit->rule.delay.count() > 0) std::this_thread::sleep_for(hit->rule.delay);
    {
        std::lock_guard lock(mu_);
        if (hit->rule.always_fail) raise_failure(hit->rule.failure, script_.id);
        if (hit->failures_served < hit->rule.fail_times) {
            ++hit->failures_served;
            raise_failure(hit->rule.failure, script_.id);
        }
    }

    ChatResponse resp;
    resp.content = hit->regex && !match.empty()
                       ? match.format(hit->rule.response, boost::format_perl)
                       : hit->rule.response;
    resp.usage.prompt_tokens = count_words(text);
    resp.usage.completion_tokens = count_words(resp.content);
    return resp;
}

std::size_t MockChatBackend::call_count() const {
    std::lock_guard lock(mu_);
    return calls_.size();
}

std::vector<std::string> MockChatBackend::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

MockEmbeddingBackend::MockEmbeddingBackend(std::string id, std::size_t dim, Mode mode, double scale)
    : id_(std::move(id)), dim_(dim), mode_(mode), scale_(scale) {
    if (dim_ == 0) throw ConfigError("mock embedding dimension must be positive");
}

std::vector<std::vector<double>> MockEmbeddingBackend::embed(const std::vector<std::string>& texts) {
    ++requests_;
    texts_ += texts.size();
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) {
        std::vector<double> v(dim_, 0.0);
        if (mode_ == Mode::tokens) {
            std::string token;
            auto flush = [&] {
                if (token.empty()) return;
                const auto h = fnv1a(token);
                v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
                token.clear();
            };
            for (char c : text) {
                if (std::isalnum(static_cast<unsigned char>(c)))
                    token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
                else
                    flush();
            }
            flush();
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (mode_ == Mode::random || norm == 0.0) {
            std::mt19937_64 rng(fnv1a(text));
            std::normal_distribution<double> gauss;
            for (auto& x : v) x = gauss(rng);
        }
        for (auto& x : v) x *= scale_;
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace amod
