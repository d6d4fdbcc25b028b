#pragma once

// Simulated annotation sessions against the review HTTP API.

#include "amod/review.hpp"
#include "amod/review_server.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <set>
#include <string>
#include <vector>

namespace testing_support {

inline const std::string kMethodA = "analogical-rules-7f3";
inline const std::string kMethodB = "simple-rules-91c";

inline std::string rule_text_a(std::size_t i) { return "Rule A" + std::to_string(i) + ": content sharing the traits of case " + std::to_string(i) + " is flagged."; }
inline std::string rule_text_b(std::size_t i) { return "Rule B" + std::to_string(i) + ": flag case " + std::to_string(i) + "."; }

inline nlohmann::json session_request(std::size_t pairs, const std::vector<std::string>& annotators, std::uint64_t seed) {
    nlohmann::json body{{"annotators", annotators}, {"seed", seed}, {"method_a", kMethodA}, {"method_b", kMethodB}};
    body["pairs"] = nlohmann::json::array();
    for (std::size_t i = 0; i < pairs; ++i)
        body["pairs"].push_back({{"a", rule_text_a(i)}, {"b", rule_text_b(i)}, {"context", "content item " + std::to_string(i)}});
    return body;
}

// Every key and string value in a payload, recursively.
inline void collect_strings(const nlohmann::json& j, std::vector<std::string>& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items()) {
            out.push_back(k);
            collect_strings(v, out);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) collect_strings(v, out);
    } else if (j.is_string()) {
        out.push_back(j.get<std::string>());
    }
}

inline bool leaks_provenance(const std::string& body) {
    static const std::vector<std::string> forbidden{kMethodA, kMethodB, "method", "model", "hidden", "assignment",
                                                    "a_on_left", "provenance", "source"};
    std::vector<std::string> strings;
    collect_strings(nlohmann::json::parse(body), strings);
    for (const auto& s : strings)
        for (const auto& f : forbidden)
            if (s.find(f) != std::string::npos) return true;
    return false;
}

struct SimulationResult {
    std::size_t responses_scanned = 0;
    std::size_t leaks = 0;
    std::size_t verdicts = 0;
    std::size_t bad_payload_shapes = 0;
    nlohmann::json report;
};

// Every annotator judges every pair: method A wins on pairs whose index is
// below `a_wins`, method B otherwise. The preferred side is found from the
// visible rule text only.
inline SimulationResult simulate_session(httplib::Client& cli, std::size_t pairs,
                                         const std::vector<std::string>& annotators, std::size_t a_wins) {
    SimulationResult out;
    const auto created = cli.Post("/session", session_request(pairs, annotators, 2024).dump(), "application/json");
    if (!created || created->status != 201) return out;
    const auto id = nlohmann::json::parse(created->body)["session_id"].get<std::string>();

    for (const auto& annotator : annotators) {
        while (true) {
            const auto next = cli.Get("/session/" + id + "/next?annotator=" + annotator);
            if (!next || next->status != 200) return out;
            ++out.responses_scanned;
            out.leaks += leaks_provenance(next->body);
            const auto pair = nlohmann::json::parse(next->body);
            if (pair.contains("done")) break;
            std::set<std::string> keys;
            for (const auto& [k, v] : pair.items()) keys.insert(k);
            if (keys != std::set<std::string>{"pair_id", "context", "left", "right"}) ++out.bad_payload_shapes;

            const auto index = std::stoul(pair["pair_id"].get<std::string>().substr(5)) - 1;
            const bool a_is_left = pair["left"] == rule_text_a(index);
            const bool want_a = index < a_wins;
            const std::string choice = (want_a == a_is_left) ? "left" : "right";
            const nlohmann::json verdict{{"annotator", annotator}, {"pair_id", pair["pair_id"]}, {"choice", choice}};
            const auto ack = cli.Post("/session/" + id + "/verdict", verdict.dump(), "application/json");
            if (!ack || ack->status != 200) return out;
            ++out.responses_scanned;
            out.leaks += leaks_provenance(ack->body);
            ++out.verdicts;
        }
        const auto progress = cli.Get("/session/" + id + "/progress?annotator=" + annotator);
        if (progress) {
            ++out.responses_scanned;
            out.leaks += leaks_provenance(progress->body);
        }
    }
    const auto report = cli.Get("/session/" + id + "/report");
    if (report && report->status == 200) out.report = nlohmann::json::parse(report->body);
    return out;
}

inline double chi_square_critical(double dof, double alpha) {
    return boost::math::quantile(boost::math::complement(boost::math::chi_squared(dof), alpha));
}

// Chi-square statistic for left-is-method-A over a 1,000-pair session.
inline double left_right_chi_square(std::size_t pairs, std::uint64_t seed) {
    amod::SessionSpec spec;
    for (std::size_t i = 0; i < pairs; ++i) spec.pairs.push_back({rule_text_a(i), rule_text_b(i), "c"});
    spec.annotators = {"solo"};
    spec.seed = seed;
    const auto session = amod::build_session(spec);
    double left = 0;
    for (const auto& a : session.order.at("solo")) left += a.a_on_left ? 1 : 0;
    const double expected = static_cast<double>(pairs) / 2.0;
    const double right = static_cast<double>(pairs) - left;
    return (left - expected) * (left - expected) / expected + (right - expected) * (right - expected) / expected;
}

}  // namespace testing_support
